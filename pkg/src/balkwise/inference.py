"""Censored-data likelihood and the box-constrained maximum likelihood fit.

Because the up/down law of the jump chain depends only on the pre-transition
state, a path enters the likelihood solely through per-state counts of up and
down moves.  Every function here reduces the path to those counts once, so a
likelihood evaluation costs O(number of distinct states), not O(path length).

Transitions out of the empty queue are certain and carry no information;
states whose balking probability is exactly 0 or 1 carry none either.  Both
are excluded from the effective sample, matching the model module's
``is_informative``.  The score is normalized by the FULL number of
transitions k (not the effective count), and the observed information and
standard errors follow the same convention throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np
from scipy.optimize import minimize

from .model import ModelConfig, ValueFamily
from .simulator import QueuePath


@dataclass(frozen=True)
class FitResult:
    """Outcome of a maximum likelihood fit.

    sigma_plugin is the observed information at the estimate (the negative
    Jacobian of the normalized score); std_err is the usual plug-in standard
    error sqrt(diag(sigma_plugin^-1) / k).
    """

    theta_hat: np.ndarray
    loglik: float
    score_norm: float
    boundary: bool
    effective_n: int
    total_k: int
    sigma_plugin: np.ndarray
    std_err: np.ndarray

    def to_json(self) -> str:
        return json.dumps(
            {
                "theta_hat": self.theta_hat.tolist(),
                "loglik": self.loglik,
                "score_norm": self.score_norm,
                "boundary": self.boundary,
                "effective_n": self.effective_n,
                "total_k": self.total_k,
                "sigma_plugin": self.sigma_plugin.tolist(),
                "std_err": self.std_err.tolist(),
            }
        )

    @staticmethod
    def from_json(text: str) -> "FitResult":
        raw = json.loads(text)
        return FitResult(
            theta_hat=np.asarray(raw["theta_hat"], dtype=float),
            loglik=float(raw["loglik"]),
            score_norm=float(raw["score_norm"]),
            boundary=bool(raw["boundary"]),
            effective_n=int(raw["effective_n"]),
            total_k=int(raw["total_k"]),
            sigma_plugin=np.asarray(raw["sigma_plugin"], dtype=float),
            std_err=np.asarray(raw["std_err"], dtype=float),
        )


def transition_counts(path: QueuePath) -> tuple[np.ndarray, np.ndarray]:
    """Per-state counts of up and down moves (indexed by pre-state)."""
    pre = path.pre_states
    size = int(pre.max()) + 1 if len(pre) else 1
    n_up = np.bincount(pre[path.ups], minlength=size)
    n_down = np.bincount(pre[~path.ups], minlength=size)
    return n_up, n_down


@dataclass(frozen=True)
class _Counts:
    """Sufficient statistics of a path for everything in this module."""

    n_up: np.ndarray
    n_down: np.ndarray
    k: int

    @staticmethod
    def of(path: QueuePath) -> "_Counts":
        n_up, n_down = transition_counts(path)
        return _Counts(n_up, n_down, len(path))


def _state_tables(theta, cfg: ModelConfig, fam: ValueFamily, qmax: int):
    """Transition probabilities and their derivatives for states 1..qmax.

    Returns (p_up, p_down, dp, d2p, informative) where dp has shape
    (qmax, dim) and d2p (qmax, dim, dim); row 0 corresponds to state 1.
    """
    qs = np.arange(1, qmax + 1)
    thresholds = cfg.price + (qs + 1) * cfg.cost_c / cfg.mu
    surv = np.asarray(fam.sf(thresholds, theta), dtype=float)
    lam_q = cfg.lam * surv
    denom = cfg.mu + lam_q
    p_up = lam_q / denom
    p_down = cfg.mu / denom

    dim = fam.dim
    grads = np.asarray(fam.grad_cdf(thresholds, theta), dtype=float).reshape(len(qs), dim)
    hesses = np.asarray(fam.hess_cdf(thresholds, theta), dtype=float).reshape(len(qs), dim, dim)
    dp = (-cfg.mu * cfg.lam / denom**2)[:, None] * grads
    d2p = (-cfg.mu * cfg.lam / denom**3)[:, None, None] * (
        hesses * denom[:, None, None]
        + 2.0 * cfg.lam * np.einsum("qj,ql->qjl", grads, grads)
    )
    informative = (surv > 0.0) & (surv < 1.0)
    return p_up, p_down, dp, d2p, informative


# States whose up-probability is this small contribute less than double
# precision can register to the score and information; including them only
# manufactures 0/0 from underflowed intermediates.
_P_FLOOR = 1e-150


def _loglik(counts: _Counts, theta, cfg, fam) -> float:
    qmax = len(counts.n_up) - 1
    if qmax < 1:
        return 0.0
    p_up, p_down, _, _, informative = _state_tables(theta, cfg, fam, qmax)
    up, down = counts.n_up[1:], counts.n_down[1:]
    # an up-move from a state nobody joins is impossible under theta
    if np.any((p_up == 0.0) & (up > 0)):
        return -np.inf
    live = informative & ((up > 0) | (down > 0))
    return float(
        np.sum(up[live] * np.log(p_up[live])) + np.sum(down[live] * np.log(p_down[live]))
    )


def _score(counts: _Counts, theta, cfg, fam) -> np.ndarray:
    qmax = len(counts.n_up) - 1
    out = np.zeros(fam.dim)
    if qmax < 1:
        return out
    p_up, p_down, dp, _, informative = _state_tables(theta, cfg, fam, qmax)
    up, down = counts.n_up[1:], counts.n_down[1:]
    live = informative & ((up > 0) | (down > 0)) & (p_up > _P_FLOOR)
    if not live.any():
        return out
    per_up = dp[live] / p_up[live, None]
    per_down = dp[live] / p_down[live, None]
    return (up[live, None] * per_up - down[live, None] * per_down).sum(axis=0) / counts.k


def _information(counts: _Counts, theta, cfg, fam) -> np.ndarray:
    qmax = len(counts.n_up) - 1
    if qmax < 1:
        return np.zeros((fam.dim, fam.dim))
    p_up, p_down, dp, d2p, informative = _state_tables(theta, cfg, fam, qmax)
    up, down = counts.n_up[1:], counts.n_down[1:]
    live = informative & ((up > 0) | (down > 0)) & (p_up > _P_FLOOR)
    if not live.any():
        return np.zeros((fam.dim, fam.dim))
    outer = np.einsum("qj,ql->qjl", dp[live], dp[live])
    up_term = d2p[live] / p_up[live, None, None] - outer / p_up[live, None, None] ** 2
    down_term = d2p[live] / p_down[live, None, None] + outer / p_down[live, None, None] ** 2
    jac = (
        up[live, None, None] * up_term - down[live, None, None] * down_term
    ).sum(axis=0) / counts.k
    return -jac


def _effective(counts: _Counts, theta, cfg, fam) -> int:
    qmax = len(counts.n_up) - 1
    if qmax < 1:
        return 0
    _, _, _, _, informative = _state_tables(theta, cfg, fam, qmax)
    return int((counts.n_up[1:] + counts.n_down[1:])[informative].sum())


def log_likelihood(path: QueuePath, theta, cfg: ModelConfig, fam: ValueFamily) -> float:
    """Log-likelihood of the parameter given an observed path.

    Sum over informative transitions of the Bernoulli up/down terms.  The
    parameter-free contributions (log mu per down-step, the certain moves out
    of the empty queue, and states with balking probability 0) are omitted,
    so values are comparable only across parameters on a fixed path.  Returns
    -inf when the path is impossible under the parameter.
    """
    theta = fam.param_space.require(theta)
    return _loglik(_Counts.of(path), theta, cfg, fam)


def score(path: QueuePath, theta, cfg: ModelConfig, fam: ValueFamily) -> np.ndarray:
    """Normalized score: gradient of log-likelihood over the full step count."""
    theta = fam.param_space.require(theta)
    return _score(_Counts.of(path), theta, cfg, fam)


def observed_information(
    path: QueuePath, theta, cfg: ModelConfig, fam: ValueFamily
) -> np.ndarray:
    """Negative Jacobian of the normalized score at theta."""
    theta = fam.param_space.require(theta)
    return _information(_Counts.of(path), theta, cfg, fam)


def score_outer_product(
    path: QueuePath, theta, cfg: ModelConfig, fam: ValueFamily
) -> np.ndarray:
    """Outer-product-of-scores information estimate (cross-check utility).

    Converges to the same limit as the observed information at the true
    parameter; the plug-in covariance in FitResult uses the observed
    information, this one is for comparison.
    """
    theta = fam.param_space.require(theta)
    counts = _Counts.of(path)
    qmax = len(counts.n_up) - 1
    if qmax < 1:
        return np.zeros((fam.dim, fam.dim))
    p_up, p_down, dp, _, informative = _state_tables(theta, cfg, fam, qmax)
    up, down = counts.n_up[1:], counts.n_down[1:]
    live = informative & ((up > 0) | (down > 0)) & (p_up > _P_FLOOR)
    if not live.any():
        return np.zeros((fam.dim, fam.dim))
    per_up = dp[live] / p_up[live, None]
    per_down = dp[live] / p_down[live, None]
    return (
        np.einsum("q,qj,ql->jl", up[live].astype(float), per_up, per_up)
        + np.einsum("q,qj,ql->jl", down[live].astype(float), per_down, per_down)
    ) / counts.k


def _golden_max_scalar(func, lo: float, hi: float, tol: float) -> float:
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = func(x1), func(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = func(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = func(x1)
    return 0.5 * (a + b)


BOUNDARY_RTOL = 1e-6
PARAM_TOL = 1e-10
SCORE_RTOL = 1e-8


def fit_mle(
    path: QueuePath,
    cfg: ModelConfig,
    fam: ValueFamily,
    init=None,
) -> FitResult:
    """Maximize the log-likelihood over the parameter box.

    One-dimensional families use a bracket scan plus golden-section search
    followed by a safeguarded Newton polish on the score; multivariate
    families use multi-start projected quasi-Newton (L-BFGS-B, five starts).
    A solution within 1e-6 of the box width of any bound is flagged as a
    boundary fit rather than an error.
    """
    if len(path) == 0:
        raise ValueError("path has no transitions")
    space = fam.param_space
    counts = _Counts.of(path)
    probe = space.clip(init) if init is not None else space.center
    if _effective(counts, probe, cfg, fam) == 0:
        raise ValueError("no informative transitions in the path")

    k = counts.k

    if fam.dim == 1:
        lo, hi = float(space.lower[0]), float(space.upper[0])
        width = hi - lo

        def f(x):
            return _loglik(counts, np.array([x]), cfg, fam)

        # coarse bracket scan guards against a misleading golden start
        grid = np.linspace(lo, hi, 65)
        values = np.array([f(x) for x in grid])
        best = int(np.argmax(values))
        a, b = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
        x = _golden_max_scalar(f, a, b, PARAM_TOL * width)
        if init is not None and f(float(probe[0])) > f(x):
            x = float(probe[0])

        # Newton polish on the score, clamped to the box
        fx = f(x)
        for _ in range(60):
            g = _score(counts, np.array([x]), cfg, fam)[0]
            if abs(g) <= SCORE_RTOL * max(1.0, abs(fx)):
                break
            h = _information(counts, np.array([x]), cfg, fam)[0, 0]
            if h <= 0:
                break
            x_new = min(max(x + g / h, lo), hi)
            f_new = f(x_new)
            if f_new < fx or abs(x_new - x) < PARAM_TOL * width:
                x = x_new if f_new >= fx else x
                break
            x, fx = x_new, f_new

        # A monotone likelihood flattens out in floating point (log(1-p)
        # rounds to 0 once p underflows), so an interior plateau point can
        # masquerade as a maximum.  When a box endpoint does at least as well
        # up to round-off, the data cannot tell them apart: report the bound.
        fx = f(x)
        flat = 1e-12 * max(1.0, abs(fx))
        f_lo, f_hi = f(lo), f(hi)
        if max(f_lo, f_hi) >= fx - flat:
            x = hi if f_hi >= f_lo else lo
        theta_hat = np.array([x])
    else:
        rng = np.random.default_rng(0)
        starts = [space.center]
        starts += [
            space.lower + (0.1 + 0.8 * rng.random(fam.dim)) * space.width for _ in range(4)
        ]
        if init is not None:
            starts.append(space.clip(init))

        def negloglik(t):
            return -_loglik(counts, t, cfg, fam)

        def neggrad(t):
            return -k * _score(counts, t, cfg, fam)

        best_res = None
        for start in starts:
            res = minimize(
                negloglik,
                start,
                jac=neggrad,
                method="L-BFGS-B",
                bounds=list(zip(space.lower, space.upper)),
            )
            if best_res is None or res.fun < best_res.fun:
                best_res = res
        theta_hat = space.clip(best_res.x)

    boundary = space.on_boundary(theta_hat, rtol=BOUNDARY_RTOL)
    final_loglik = _loglik(counts, theta_hat, cfg, fam)
    final_score = _score(counts, theta_hat, cfg, fam)
    info = _information(counts, theta_hat, cfg, fam)
    std_err = np.full(fam.dim, np.nan)
    try:
        cov = np.linalg.inv(info) / k
        diag = np.diag(cov)
        if np.all(diag > 0):
            std_err = np.sqrt(diag)
    except np.linalg.LinAlgError:
        pass
    return FitResult(
        theta_hat=theta_hat,
        loglik=final_loglik,
        score_norm=float(np.linalg.norm(final_score)),
        boundary=boundary,
        effective_n=_effective(counts, theta_hat, cfg, fam),
        total_k=k,
        sigma_plugin=info,
        std_err=std_err,
    )


def confidence_interval(fit: FitResult, level: float) -> np.ndarray:
    """Per-coordinate normal-approximation confidence intervals.

    Returns an array of (lower, upper) rows.  Requires an interior fit with
    an invertible plug-in information matrix.
    """
    if not 0.0 <= level < 1.0:
        raise ValueError("confidence level must lie in [0, 1)")
    if fit.boundary:
        raise ValueError("confidence interval undefined for a boundary fit")
    if np.any(~np.isfinite(fit.std_err)):
        raise ValueError("information singular")
    z = NormalDist().inv_cdf(0.5 * (1.0 + level))
    half = z * fit.std_err
    return np.column_stack([fit.theta_hat - half, fit.theta_hat + half])
