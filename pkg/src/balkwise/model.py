"""Economic and queueing primitives for an observable single-server queue.

Customers arrive at rate ``lam``, are served at rate ``mu``, pay an admission
``price`` on joining and a waiting cost ``cost_c`` per unit of time in the
system.  A customer facing ``q`` people in the system joins only if their
(random) service value covers ``offered_reward(q)``, so arrivals are thinned
by the value distribution: effective arrivals form a Poisson process whose
rate depends on the queue length.  Everything downstream (simulation,
likelihoods, stationary analysis, pricing) is built on the functions here.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ModelConfig:
    """Economic environment of the queue.

    lam     -- arrival rate of (potential) customers, > 0
    mu      -- service rate, > 0
    cost_c  -- waiting cost per unit time in the system, > 0
    price   -- admission price charged on joining, >= 0
    """

    lam: float
    mu: float
    cost_c: float
    price: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"arrival rate must be positive, got {self.lam}")
        if not self.mu > 0:
            raise ValueError(f"service rate must be positive, got {self.mu}")
        if not self.cost_c > 0:
            raise ValueError(f"waiting cost must be positive, got {self.cost_c}")
        if not self.price >= 0:
            raise ValueError(f"price must be nonnegative, got {self.price}")

    def with_price(self, price: float) -> "ModelConfig":
        return ModelConfig(self.lam, self.mu, self.cost_c, price)


@dataclass(frozen=True)
class ParamSpace:
    """Compact box of admissible parameter vectors."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size < 1:
            raise ValueError("bounds must be 1-d arrays of equal, positive length")
        if not np.all(lower < upper):
            raise ValueError("each lower bound must be strictly below its upper bound")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, theta) -> bool:
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        return t.shape == self.lower.shape and bool(
            np.all(t >= self.lower) and np.all(t <= self.upper)
        )

    def require(self, theta) -> np.ndarray:
        """Return theta as an array, raising if it falls outside the box."""
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        if not self.contains(t):
            raise ValueError(
                f"parameter {t} outside the parameter space "
                f"[{self.lower}, {self.upper}]"
            )
        return t

    def clip(self, theta) -> np.ndarray:
        return np.clip(np.atleast_1d(np.asarray(theta, dtype=float)), self.lower, self.upper)

    def on_boundary(self, theta, rtol: float = 1e-6) -> bool:
        """True when any coordinate sits within rtol * box width of a bound."""
        t = np.atleast_1d(np.asarray(theta, dtype=float))
        slack = rtol * self.width
        return bool(np.any(t - self.lower <= slack) or np.any(self.upper - t <= slack))


class ValueFamily(ABC):
    """Parametric distribution of the customers' service value.

    Implementations must be immutable and safe to share across workers.
    ``cdf`` accepts scalar or array ``r`` and evaluates elementwise;
    ``grad_cdf``/``hess_cdf`` return shapes ``(dim,)`` / ``(dim, dim)`` for
    scalar ``r`` and ``(m, dim)`` / ``(m, dim, dim)`` for an array of length
    ``m``.  The cdf is 0 for r < 0 by convention, nondecreasing in r, and its
    parameter derivatives must match finite differences (see the test suite).
    """

    param_space: ParamSpace

    @property
    def dim(self) -> int:
        return self.param_space.dim

    @abstractmethod
    def cdf(self, r, theta):
        """P(value <= r) under parameter theta."""

    def sf(self, r, theta):
        """Survival P(value > r); override when 1 - cdf loses precision."""
        return 1.0 - self.cdf(r, theta)

    @abstractmethod
    def grad_cdf(self, r, theta):
        """Gradient of the cdf with respect to the parameter vector."""

    @abstractmethod
    def hess_cdf(self, r, theta):
        """Hessian of the cdf with respect to the parameter vector."""

    def quantile(self, u: float, theta) -> float:
        """Inverse cdf by bisection; override when a closed form exists."""
        theta = self.param_space.require(theta)
        if not 0.0 <= u < 1.0:
            raise ValueError("quantile level must lie in [0, 1)")
        lo, hi = 0.0, 1.0
        while self.cdf(hi, theta) < u:
            hi *= 2.0
            if hi > 1e300:
                raise RuntimeError("quantile bisection failed to bracket")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid, theta) < u:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-14 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ExponentialFamily(ValueFamily):
    """Exponentially distributed service values: cdf 1 - exp(-theta * r)."""

    param_space: ParamSpace = field(
        default_factory=lambda: ParamSpace(np.array([1e-3]), np.array([10.0]))
    )

    def __post_init__(self):
        if self.param_space.dim != 1:
            raise ValueError("the exponential family has a single parameter")
        if self.param_space.lower[0] <= 0:
            raise ValueError("the exponential rate must be positive")

    def cdf(self, r, theta):
        theta = self.param_space.require(theta)[0]
        r = np.asarray(r, dtype=float)
        out = np.where(r >= 0.0, -np.expm1(-theta * np.maximum(r, 0.0)), 0.0)
        return float(out) if out.ndim == 0 else out

    def sf(self, r, theta):
        theta = self.param_space.require(theta)[0]
        r = np.asarray(r, dtype=float)
        out = np.where(r >= 0.0, np.exp(-theta * np.maximum(r, 0.0)), 1.0)
        return float(out) if out.ndim == 0 else out

    def grad_cdf(self, r, theta):
        theta = self.param_space.require(theta)[0]
        r = np.asarray(r, dtype=float)
        g = np.where(r >= 0.0, r * np.exp(-theta * np.maximum(r, 0.0)), 0.0)
        return np.atleast_1d(g)[..., None] if g.ndim else np.array([float(g)])

    def hess_cdf(self, r, theta):
        theta = self.param_space.require(theta)[0]
        r = np.asarray(r, dtype=float)
        h = np.where(r >= 0.0, -(r**2) * np.exp(-theta * np.maximum(r, 0.0)), 0.0)
        if h.ndim == 0:
            return np.array([[float(h)]])
        return h[:, None, None]

    def quantile(self, u: float, theta) -> float:
        theta = self.param_space.require(theta)[0]
        if not 0.0 <= u < 1.0:
            raise ValueError("quantile level must lie in [0, 1)")
        return -np.log1p(-u) / theta


def offered_reward(q, cfg: ModelConfig):
    """Minimum service value that makes joining rational at queue length q."""
    q = np.asarray(q)
    if np.any(q < 0):
        raise ValueError("queue length must be nonnegative")
    out = cfg.price + (q + 1) * cfg.cost_c / cfg.mu
    return float(out) if out.ndim == 0 else out


def joining_rate(q, theta, cfg: ModelConfig, fam: ValueFamily):
    """Effective arrival rate at queue length q: lam * P(value >= threshold)."""
    theta = fam.param_space.require(theta)
    out = cfg.lam * fam.sf(offered_reward(q, cfg), theta)
    return float(out) if np.ndim(out) == 0 else out


def up_probability(q: int, theta, cfg: ModelConfig, fam: ValueFamily) -> float:
    """Probability that the next transition from state q is a join.

    From an empty queue every observed transition is a join, so the
    probability is 1 regardless of the parameter.
    """
    if q == 0:
        fam.param_space.require(theta)
        return 1.0
    rate = joining_rate(q, theta, cfg, fam)
    if rate == 0.0:
        return 0.0
    return rate / (rate + cfg.mu)


def up_prob_grad(q: int, theta, cfg: ModelConfig, fam: ValueFamily) -> np.ndarray:
    """Parameter gradient of the up-transition probability.

    State 0 carries no parameter dependence (the transition is deterministic),
    so the gradient there is exactly zero; this keeps sums over a whole path
    equal to sums over the informative steps.
    """
    theta = fam.param_space.require(theta)
    if q == 0:
        return np.zeros(fam.dim)
    r = offered_reward(q, cfg)
    denom = cfg.mu + cfg.lam * fam.sf(r, theta)
    return -cfg.mu * cfg.lam * fam.grad_cdf(r, theta) / denom**2


def up_prob_hess(q: int, theta, cfg: ModelConfig, fam: ValueFamily) -> np.ndarray:
    """Parameter Hessian of the up-transition probability (zero matrix at q=0)."""
    theta = fam.param_space.require(theta)
    if q == 0:
        return np.zeros((fam.dim, fam.dim))
    r = offered_reward(q, cfg)
    grad = fam.grad_cdf(r, theta)
    denom = cfg.mu + cfg.lam * fam.sf(r, theta)
    numer = fam.hess_cdf(r, theta) * denom + 2.0 * cfg.lam * np.outer(grad, grad)
    return -cfg.mu * cfg.lam * numer / denom**3


def is_informative(q: int, theta, cfg: ModelConfig, fam: ValueFamily) -> bool:
    """Whether a transition out of state q tells us anything about theta.

    True iff q > 0 and the balking probability at q is strictly between 0 and
    1.  The comparison is exact on purpose: families that attain 0 or 1 do so
    structurally (bounded support), not through round-off, and a tolerance
    would silently drop valid data.  Evaluated through the survival function
    so that a survival probability below machine epsilon (where 1 - cdf
    would round to zero) still counts as informative.
    """
    if q < 0:
        raise ValueError("queue length must be nonnegative")
    if q == 0:
        return False
    surv = fam.sf(offered_reward(q, cfg), fam.param_space.require(theta))
    return 0.0 < surv < 1.0
