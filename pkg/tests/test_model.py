import math

import numpy as np
import pytest

from balkwise.model import (
    ExponentialFamily,
    ModelConfig,
    ParamSpace,
    is_informative,
    joining_rate,
    offered_reward,
    up_prob_grad,
    up_prob_hess,
    up_probability,
)
from helpers import UniformValueFamily


def test_offered_reward_values():
    assert offered_reward(0, ModelConfig(1, 1, 1, 15)) == 16.0
    assert offered_reward(0, ModelConfig(1, 1, 1, 0)) == 1.0
    assert offered_reward(9, ModelConfig(1, 1, 1, 15)) == 25.0


def test_offered_reward_rejects_negative_state(anchor_cfg):
    with pytest.raises(ValueError):
        offered_reward(-1, anchor_cfg)


@pytest.mark.parametrize(
    "bad",
    [
        dict(lam=0, mu=1, cost_c=1, price=1),
        dict(lam=1, mu=-1, cost_c=1, price=1),
        dict(lam=1, mu=1, cost_c=0, price=1),
        dict(lam=1, mu=1, cost_c=1, price=-0.5),
    ],
)
def test_model_config_validation(bad):
    with pytest.raises(ValueError):
        ModelConfig(**bad)


def test_param_space_validation():
    with pytest.raises(ValueError):
        ParamSpace([1.0], [1.0])
    with pytest.raises(ValueError):
        ParamSpace([1.0, 2.0], [3.0])
    space = ParamSpace([0.0, 1.0], [1.0, 2.0])
    assert space.dim == 2
    assert space.contains([0.5, 1.5])
    assert not space.contains([0.5, 2.5])
    with pytest.raises(ValueError):
        space.require([2.0, 1.5])


def test_joining_rate_exponential(anchor_cfg, expo):
    # direct evaluation of lam * exp(-theta * r(0)) with r(0) = 16
    expected = math.exp(-0.32)
    assert joining_rate(0, [0.02], anchor_cfg, expo) == pytest.approx(expected, rel=1e-12)
    assert 0.72614 < expected < 0.72616


def test_joining_rate_limits(anchor_cfg):
    blocked = UniformValueFamily(width=1.0, lower=0.0, upper=5.0)
    # support entirely below the threshold: everyone balks
    assert joining_rate(0, [1.0], anchor_cfg, blocked) == 0.0
    open_gate = UniformValueFamily(width=1.0, lower=50.0, upper=200.0)
    # support entirely above the threshold: nobody balks
    assert joining_rate(0, [100.0], anchor_cfg, open_gate) == pytest.approx(anchor_cfg.lam)


def test_joining_rate_rejects_theta_outside_box(anchor_cfg, expo):
    with pytest.raises(ValueError):
        joining_rate(0, [99.0], anchor_cfg, expo)


def test_up_probability_cases(anchor_cfg, expo):
    assert up_probability(0, [0.02], anchor_cfg, expo) == 1.0
    s = math.exp(-0.34)
    assert up_probability(1, [0.02], anchor_cfg, expo) == pytest.approx(s / (1 + s), rel=1e-12)
    assert 0.41580 < s / (1 + s) < 0.41582
    # nobody joins at this state: down is certain
    blocked = UniformValueFamily(width=1.0, lower=0.0, upper=5.0)
    assert up_probability(3, [1.0], anchor_cfg, blocked) == 0.0
    # no balking and symmetric rates
    open_gate = UniformValueFamily(width=1.0, lower=50.0, upper=200.0)
    assert up_probability(1, [100.0], anchor_cfg, open_gate) == pytest.approx(0.5)


def test_joining_rate_nonincreasing_in_state(anchor_cfg, expo):
    rates = joining_rate(np.arange(0, 40), [0.05], anchor_cfg, expo)
    assert np.all(np.diff(rates) <= 0)


def test_up_prob_grad_value(anchor_cfg, expo):
    # direct evaluation: -mu*lam*r(1)*exp(-theta*r(1)) / (mu+lam*exp(-theta*r(1)))^2
    s = math.exp(-0.34)
    expected = -17.0 * s / (1.0 + s) ** 2
    got = up_prob_grad(1, [0.02], anchor_cfg, expo)
    assert got.shape == (1,)
    assert got[0] == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(-4.12950, abs=5e-6)


def test_up_prob_grad_state_zero_convention(anchor_cfg, expo):
    assert np.all(up_prob_grad(0, [0.02], anchor_cfg, expo) == 0.0)
    assert np.all(up_prob_hess(0, [0.02], anchor_cfg, expo) == 0.0)


def test_up_prob_grad_flat_direction(anchor_cfg):
    fam = UniformValueFamily(width=1.0, lower=0.0, upper=5.0)
    # threshold far above the support: cdf locally flat in the parameter
    assert np.all(up_prob_grad(5, [1.0], anchor_cfg, fam) == 0.0)
    assert np.all(up_prob_hess(5, [1.0], anchor_cfg, fam) == 0.0)


def _fd_up_prob(q, theta, cfg, fam, h):
    hi = up_probability(q, [theta + h], cfg, fam)
    lo = up_probability(q, [theta - h], cfg, fam)
    return (hi - lo) / (2 * h)


def _fd_up_grad(q, theta, cfg, fam, h):
    hi = up_prob_grad(q, [theta + h], cfg, fam)[0]
    lo = up_prob_grad(q, [theta - h], cfg, fam)[0]
    return (hi - lo) / (2 * h)


@pytest.mark.parametrize("theta", [0.01, 0.02, 0.1, 0.5, 1.0])
def test_up_prob_grad_matches_finite_difference(theta, anchor_cfg, expo):
    for q in range(1, 31):
        h = 1e-6 * theta
        fd = _fd_up_prob(q, theta, anchor_cfg, expo, h)
        got = up_prob_grad(q, [theta], anchor_cfg, expo)[0]
        if fd == 0.0:
            assert abs(got) < 1e-12
        else:
            assert got == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("theta", [0.02, 0.1, 0.5])
def test_up_prob_hess_matches_finite_difference(theta, anchor_cfg, expo):
    for q in range(1, 31):
        h = 1e-5 * theta
        fd = _fd_up_grad(q, theta, anchor_cfg, expo, h)
        got = up_prob_hess(q, [theta], anchor_cfg, expo)[0, 0]
        if abs(fd) < 1e-14:
            assert abs(got) < 1e-10
        else:
            assert got == pytest.approx(fd, rel=1e-5)


def test_hess_symmetry(anchor_cfg, expo):
    h = up_prob_hess(3, [0.1], anchor_cfg, expo)
    assert np.allclose(h, h.T)


def test_exponential_closed_forms(expo):
    rs = np.array([0.5, 1.0, 16.0, 25.0, 120.0])
    theta = 0.07
    # independent evaluation of the closed-form derivative expressions
    assert np.allclose(expo.cdf(rs, [theta]), 1.0 - np.exp(-theta * rs), rtol=0, atol=1e-15)
    assert np.allclose(
        expo.grad_cdf(rs, [theta])[:, 0], rs * np.exp(-theta * rs), rtol=1e-15
    )
    assert np.allclose(
        expo.hess_cdf(rs, [theta])[:, 0, 0], -(rs**2) * np.exp(-theta * rs), rtol=1e-15
    )


def test_exponential_cdf_properties(expo):
    assert expo.cdf(0.0, [0.5]) == 0.0
    assert expo.cdf(-3.0, [0.5]) == 0.0
    rs = np.linspace(0, 100, 300)
    vals = expo.cdf(rs, [0.3])
    assert np.all(np.diff(vals) > 0)
    assert np.all((vals >= 0) & (vals <= 1))


def test_exponential_survival_avoids_cancellation(expo):
    # 1 - cdf would round to zero here; the survival form must not
    assert expo.sf(16.0, [5.0]) == pytest.approx(math.exp(-80.0), rel=1e-12)
    assert 0.0 < expo.sf(16.0, [5.0]) < 1e-30


def test_exponential_quantile(expo):
    for u in (0.0, 0.3, 0.99):
        r = expo.quantile(u, [0.25])
        assert expo.cdf(r, [0.25]) == pytest.approx(u, abs=1e-12)


def test_generic_quantile_bisection(anchor_cfg):
    fam = UniformValueFamily(width=2.0, lower=1.0, upper=10.0)
    assert fam.quantile(0.25, [4.0]) == pytest.approx(4.5, abs=1e-9)


def test_is_informative(anchor_cfg, expo):
    assert not is_informative(0, [0.02], anchor_cfg, expo)
    assert is_informative(3, [0.02], anchor_cfg, expo)
    assert is_informative(3, [4.9], anchor_cfg, expo)
    blocked = UniformValueFamily(width=1.0, lower=0.0, upper=5.0)
    assert not is_informative(3, [1.0], anchor_cfg, blocked)  # cdf exactly 1
    open_gate = UniformValueFamily(width=1.0, lower=50.0, upper=200.0)
    assert not is_informative(1, [100.0], anchor_cfg, open_gate)  # cdf exactly 0


def test_uniform_family_gradient_matches_fd(anchor_cfg):
    fam = UniformValueFamily(width=10.0, lower=5.0, upper=30.0)
    r, theta = 16.0, 12.0  # interior of the support, away from the kinks
    h = 1e-6 * theta
    fd = (fam.cdf(r, [theta + h]) - fam.cdf(r, [theta - h])) / (2 * h)
    assert fam.grad_cdf(r, [theta])[0] == pytest.approx(fd, rel=1e-6)
