"""Closed-form stationary analysis of the balking queue.

The queue length is an ergodic birth-death process whenever somebody joins
the empty queue, so its stationary law has the classical product form: the
unnormalized weight of state q is the product of joining-to-service rate
ratios up to q.  Everything here is computed on a provably-truncated state
space.  Two stationary weightings coexist: the continuous-time occupancy law
(weight proportional to the product itself) and the transition-epoch law of
the jump chain (product times the total exit rate).  Revenue accrues in
continuous time; the score ergodics of the estimator live on the jump chain.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import ModelConfig, ValueFamily

STATE_CAP = 10**6


class TruncationError(RuntimeError):
    """State space could not be truncated (non-balking parameters)."""


@dataclass(frozen=True)
class StationaryDist:
    """Stationary probabilities over states 0..qstar.

    tail_bound is a rigorous upper bound on the probability mass beyond
    qstar under the chosen weighting.
    """

    probs: np.ndarray
    qstar: int
    tail_bound: float
    weighting: str


def stationary_weights(theta, cfg: ModelConfig, fam: ValueFamily, qmax: int) -> np.ndarray:
    """Unnormalized stationary weights of states 0..qmax.

    The weight of state 0 is 1; each further state multiplies on the ratio of
    the previous state's joining rate to the service rate.  Computed
    iteratively, never re-multiplying full products.
    """
    theta = fam.param_space.require(theta)
    rates = _joining_rates(theta, cfg, fam, 0, qmax + 1)
    out = np.empty(qmax + 1)
    out[0] = 1.0
    if qmax >= 1:
        np.cumprod(rates[:-1] / cfg.mu, out=out[1:])
    return out


def _joining_rates(theta, cfg: ModelConfig, fam: ValueFamily, lo: int, hi: int) -> np.ndarray:
    q = np.arange(lo, hi)
    thresholds = cfg.price + (q + 1) * cfg.cost_c / cfg.mu
    return cfg.lam * np.asarray(fam.sf(thresholds, theta), dtype=float)


def _truncated_tables(theta, cfg: ModelConfig, fam: ValueFamily, eps: float):
    """Weights and joining rates up to the truncation state.

    The truncation state is the smallest q whose joining-to-service ratio has
    dropped below 1/2 and whose weight is below eps times the accumulated
    weight; past it the weights are dominated by a geometric sequence with
    ratio < 1/2, which gives a provable tail bound.
    """
    theta = fam.param_space.require(theta)
    if not 0.0 < eps < 1.0:
        raise ValueError("tail tolerance must lie in (0, 1)")
    mu = cfg.mu
    size = 128
    lam_q = _joining_rates(theta, cfg, fam, 0, size)
    if lam_q[0] <= 0.0:
        raise ValueError("joining rate at the empty queue is zero")
    while True:
        weights = np.empty(len(lam_q))
        weights[0] = 1.0
        with np.errstate(over="ignore"):
            np.cumprod(lam_q[:-1] / mu, out=weights[1:])
            partial = np.cumsum(weights)
        ok = (lam_q / mu < 0.5) & (weights < eps * partial)
        if ok.any():
            qstar = int(np.argmax(ok))
            return weights[: qstar + 1], lam_q[: qstar + 1], partial[qstar]
        if not np.isfinite(weights[-1]) or len(lam_q) >= STATE_CAP:
            raise TruncationError(
                f"no truncation state found within {STATE_CAP} states; "
                "the chain does not appear to balk"
            )
        new_size = min(2 * len(lam_q), STATE_CAP)
        lam_q = np.concatenate(
            [lam_q, _joining_rates(theta, cfg, fam, len(lam_q), new_size)]
        )


def stationary_distribution(
    theta,
    cfg: ModelConfig,
    fam: ValueFamily,
    eps: float = 1e-12,
    weighting: str = "time",
) -> StationaryDist:
    """Truncated stationary distribution of the queue length.

    weighting="time" gives the continuous-time occupancy law; "jump" gives
    the law of the state seen at transition epochs (weights multiplied by
    the total exit rate of each state).
    """
    weights, lam_q, total = _truncated_tables(theta, cfg, fam, eps)
    qstar = len(weights) - 1
    rho = lam_q[-1] / cfg.mu
    tail_weight = weights[-1] * rho / (1.0 - rho)
    if weighting == "time":
        probs = weights / weights.sum()
        tail_bound = tail_weight / total
    elif weighting == "jump":
        exit_rates = lam_q + cfg.mu
        exit_rates[0] = lam_q[0]
        w = weights * exit_rates
        probs = w / w.sum()
        tail_bound = tail_weight * (lam_q[-1] + cfg.mu) / w.sum()
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    return StationaryDist(probs=probs, qstar=qstar, tail_bound=float(tail_bound), weighting=weighting)


def expected_revenue(
    price: float, theta, cfg: ModelConfig, fam: ValueFamily, eps: float = 1e-12
) -> float:
    """Stationary expected revenue per unit time at the given price.

    Revenue accrues in continuous time, so the time-weighted stationary law
    applies: price times the stationary mean of the joining rate.  The
    price stored in cfg is ignored in favor of the argument.
    """
    if price < 0:
        raise ValueError("price must be nonnegative")
    cfg_p = cfg.with_price(price)
    weights, lam_q, _ = _truncated_tables(theta, cfg_p, fam, eps)
    return price * float((weights * lam_q).sum() / weights.sum())


def theoretical_sigma(
    theta,
    cfg: ModelConfig,
    fam: ValueFamily,
    eps: float = 1e-12,
    weighting: str = "jump",
    accounting: str = "transition",
) -> np.ndarray:
    """Asymptotic information matrix of the estimator at the given parameter.

    With accounting="transition" (the exact form, matching the ergodic limit
    of the observed information): the stationary mean, under the chosen
    weighting, of mu*lam*g(q)g(q)^T / ((1-F)(mu + lam*(1-F))^2) over
    informative pre-states q >= 1, with g the cdf parameter gradient at the
    offered-reward threshold of q.  The empty state contributes nothing; its
    transition probability does not depend on the parameter.

    With accounting="occupancy": an alternative bookkeeping that attributes
    to every occupied state, the empty one included, the information of the
    arrival that fills it, i.e. the same summand evaluated at threshold
    price + q*cost_c/mu.  This is the convention behind the std-vs-price
    sensitivity curves; use the default for anything estimator-facing.
    """
    theta = fam.param_space.require(theta)
    dist = stationary_distribution(theta, cfg, fam, eps=eps, weighting=weighting)
    if accounting == "transition":
        qs = np.arange(1, dist.qstar + 1)
        probs = dist.probs[1:]
        thresholds = cfg.price + (qs + 1) * cfg.cost_c / cfg.mu
    elif accounting == "occupancy":
        qs = np.arange(0, dist.qstar + 1)
        probs = dist.probs
        thresholds = cfg.price + qs * cfg.cost_c / cfg.mu
    else:
        raise ValueError(f"unknown accounting {accounting!r}")
    if qs.size == 0:
        return np.zeros((fam.dim, fam.dim))
    surv = np.asarray(fam.sf(thresholds, theta), dtype=float)
    grads = np.asarray(fam.grad_cdf(thresholds, theta), dtype=float).reshape(qs.size, fam.dim)
    denom = cfg.mu + cfg.lam * surv
    live = surv > 0.0
    coeff = np.zeros(qs.size)
    coeff[live] = probs[live] * cfg.mu * cfg.lam / (surv[live] * denom[live] ** 2)
    return np.einsum("q,qj,ql->jl", coeff, grads, grads)


def asymptotic_std(
    price: float,
    theta,
    cfg: ModelConfig,
    fam: ValueFamily,
    eps: float = 1e-12,
    weighting: str = "time",
    accounting: str = "occupancy",
) -> np.ndarray:
    """Asymptotic standard deviation of the sqrt(k)-scaled estimation errors.

    Square root of the diagonal of the inverse information matrix, evaluated
    with the queue operating at the given price.  Defaults to the occupancy
    accounting over the time-stationary law, which is the convention the
    std-vs-price sensitivity curves are drawn in; pass weighting="jump",
    accounting="transition" for the estimator-exact value.
    """
    sigma = theoretical_sigma(
        theta, cfg.with_price(price), fam, eps=eps, weighting=weighting, accounting=accounting
    )
    try:
        inv = np.linalg.inv(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("information matrix is singular") from exc
    diag = np.diag(inv)
    if np.any(diag <= 0):
        raise ValueError("information matrix is not positive definite")
    return np.sqrt(diag)


def _golden_max(func, lo: float, hi: float, tol: float = 1e-9) -> float:
    """Golden-section maximizer on [lo, hi] for a unimodal function."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = func(x1), func(x2)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = func(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = func(x1)
    return 0.5 * (a + b)


def price_upper_bound(theta, cfg: ModelConfig, fam: ValueFamily, frac: float = 1e-6) -> float:
    """Smallest price at which effectively nobody joins the empty queue."""
    theta = fam.param_space.require(theta)

    def rate0(p: float) -> float:
        return _joining_rates(theta, cfg.with_price(p), fam, 0, 1)[0]

    target = frac * cfg.lam
    hi = 1.0
    while rate0(hi) >= target:
        hi *= 2.0
        if hi > 1e12:
            raise TruncationError("joining rate does not vanish with price")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if rate0(mid) >= target:
            lo = mid
        else:
            hi = mid
    return hi


def _grid_then_golden(func, bounds: tuple[float, float], grid: int = 256) -> float:
    """Coarse grid scan followed by golden-section refinement in the best bracket."""
    lo, hi = bounds
    points = np.linspace(lo, hi, grid)
    values = np.array([func(p) for p in points])
    best = int(np.argmax(values))
    a = points[max(best - 1, 0)]
    b = points[min(best + 1, grid - 1)]
    return _golden_max(func, a, b)


def optimal_price(
    theta,
    cfg: ModelConfig,
    fam: ValueFamily,
    bounds: tuple[float, float] | None = None,
    eps: float = 1e-12,
    grid: int = 256,
) -> float:
    """Revenue-maximizing price for the given parameter."""
    if bounds is None:
        bounds = (0.01, price_upper_bound(theta, cfg, fam))
    return _grid_then_golden(
        lambda p: expected_revenue(p, theta, cfg, fam, eps=eps), bounds, grid
    )


def min_std_price(
    theta,
    cfg: ModelConfig,
    fam: ValueFamily,
    bounds: tuple[float, float] | None = None,
    eps: float = 1e-12,
    grid: int = 256,
    weighting: str = "time",
    accounting: str = "occupancy",
) -> float:
    """Price that minimizes the asymptotic estimation standard deviation."""
    if bounds is None:
        bounds = (0.01, price_upper_bound(theta, cfg, fam))
    return _grid_then_golden(
        lambda p: -float(
            asymptotic_std(
                p, theta, cfg, fam, eps=eps, weighting=weighting, accounting=accounting
            )[0]
        ),
        bounds,
        grid,
    )


def revenue_curve(prices, theta, cfg: ModelConfig, fam: ValueFamily, eps: float = 1e-12):
    return np.array([expected_revenue(p, theta, cfg, fam, eps=eps) for p in prices])


def std_curve(
    prices,
    theta,
    cfg: ModelConfig,
    fam: ValueFamily,
    eps: float = 1e-12,
    weighting: str = "time",
    accounting: str = "occupancy",
):
    return np.array(
        [
            float(
                asymptotic_std(
                    p, theta, cfg, fam, eps=eps, weighting=weighting, accounting=accounting
                )[0]
            )
            for p in prices
        ]
    )


def write_curve_csv(fileobj, prices, values, label: str) -> None:
    """Serialize a (price, value) curve; label is "revenue" or "std"."""
    writer = csv.writer(fileobj)
    writer.writerow(["price", label])
    for p, v in zip(prices, values):
        writer.writerow([repr(float(p)), repr(float(v))])
