"""Iterative estimate-then-reprice loop for revenue maximization.

Each iteration collects a batch of queue transitions at the current price,
fits the value-distribution parameter on that batch, pools the per-iteration
estimates weighted by sample size, moves the price to the revenue maximizer
under the pooled estimate, and stops once the realized revenue rate agrees
with the model's prediction to within a tolerance.  Boundary fits are treated
as "not enough data": one more observation is collected and the fit repeated.

The observation source is abstract: the shipped SimulatedSource drives the
queue simulator with a known true parameter (evaluation mode), but anything
that can return a QueuePath of transitions collected at a requested price
satisfies the contract (deployment mode).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .inference import fit_mle
from .model import ModelConfig, ValueFamily
from .simulator import QueuePath, _informative_mask, _walk, concat_paths
from .stationary import expected_revenue, optimal_price


class ObservationSource(Protocol):
    """Anything that can hand over queue transitions observed at a price."""

    def collect(self, price: float, steps: int) -> QueuePath: ...


class SimulatedSource:
    """Observation source backed by the seeded queue simulator.

    The chain state persists across calls (the queue does not reset when the
    price changes) and the random stream continues, so a whole pricing run is
    deterministic given the seed.
    """

    def __init__(self, cfg_base: ModelConfig, fam: ValueFamily, theta0, seed: int = 0):
        self.cfg_base = cfg_base
        self.fam = fam
        self.theta0 = fam.param_space.require(theta0)
        self.rng = np.random.default_rng(seed)
        self.state = 0

    def collect(self, price: float, steps: int) -> QueuePath:
        if steps < 1:
            raise ValueError("steps must be >= 1")
        cfg = self.cfg_base.with_price(price)
        states, lam_tab = _walk(self.rng, steps, self.state, self.theta0, cfg, self.fam)
        pre = states[:-1]
        ups = states[1:] > pre
        exit_rates = np.where(pre > 0, lam_tab[pre] + cfg.mu, lam_tab[0])
        holds = self.rng.standard_exponential(steps) / exit_rates
        self.state = int(states[-1])
        return QueuePath(
            states=states,
            ups=ups,
            holds=holds,
            revenue=cfg.price * int(ups.sum()),
            total_time=float(holds.sum()),
            informative_mask=_informative_mask(pre, self.theta0, cfg, self.fam),
        )


_SCHEDULES = ("increment", "doubling", "custom")


@dataclass(frozen=True)
class PricingConfig:
    """Knobs of the pricing loop.

    schedule picks the growth rule for the per-iteration minimum observation
    count: "increment" (k+1), "doubling" (2k), or "custom" with
    growth_multiplier (ceil(multiplier * k)); grow_on decides whether the
    rule is applied to the observations actually used (including boundary
    retries) or to the nominal minimum.  max_observations optionally caps the
    total observations spent on learning: an iteration that would push the
    total past the cap is not started.  delta_mode picks whether the stopping
    gap compares the model prediction against the current iteration's revenue
    rate or the cumulative rate over all iterations so far.  Boundary refits
    are capped at boundary_retry_factor times the iteration minimum, with a
    floor so tiny early batches still get enough room to reach an interior
    estimate.
    """

    initial_price: float
    k1_min: int = 2
    schedule: str = "increment"
    growth_multiplier: Optional[float] = None
    tol: float = 0.01
    max_iterations: int = 10_000
    price_bounds: Optional[tuple[float, float]] = None
    max_observations: Optional[int] = None
    boundary_retry_factor: int = 10
    boundary_retry_floor: int = 100
    trunc_eps: float = 1e-12
    delta_mode: str = "iteration"
    grow_on: str = "actual"

    def __post_init__(self):
        if self.initial_price < 0:
            raise ValueError("initial price must be nonnegative")
        if self.k1_min < 1:
            raise ValueError("k1_min must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.schedule not in _SCHEDULES:
            raise ValueError(f"schedule must be one of {_SCHEDULES}")
        if self.schedule == "custom":
            if self.growth_multiplier is None or self.growth_multiplier <= 1.0:
                raise ValueError("custom schedule needs a growth_multiplier > 1")
        if self.delta_mode not in ("cumulative", "iteration"):
            raise ValueError("delta_mode must be 'cumulative' or 'iteration'")
        if self.grow_on not in ("actual", "nominal"):
            raise ValueError("grow_on must be 'actual' or 'nominal'")

    def grow(self, k: int) -> int:
        if self.schedule == "increment":
            return k + 1
        if self.schedule == "doubling":
            return 2 * k
        return int(math.ceil(self.growth_multiplier * k))


@dataclass(frozen=True)
class IterationRecord:
    index: int
    k_i: int
    theta_i: np.ndarray
    theta_pooled: np.ndarray
    price_used: float
    price_next: float
    delta: float
    revenue_pi: float
    time_ti: float
    boundary_retries: int


@dataclass(frozen=True)
class PricingTrace:
    records: tuple[IterationRecord, ...]
    final_price: float
    stopped_reason: str

    def to_csv(self, fileobj) -> None:
        writer = csv.writer(fileobj)
        writer.writerow(
            ["iter", "k_i", "theta_i", "theta_pooled", "price_next", "delta", "revenue", "time"]
        )
        for r in self.records:
            writer.writerow(
                [
                    r.index,
                    r.k_i,
                    _theta_cell(r.theta_i),
                    _theta_cell(r.theta_pooled),
                    repr(float(r.price_next)),
                    repr(float(r.delta)),
                    repr(float(r.revenue_pi)),
                    repr(float(r.time_ti)),
                ]
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "final_price": self.final_price,
                "stopped_reason": self.stopped_reason,
                "records": [
                    {
                        "iter": r.index,
                        "k_i": r.k_i,
                        "theta_i": r.theta_i.tolist(),
                        "theta_pooled": r.theta_pooled.tolist(),
                        "price_used": r.price_used,
                        "price_next": r.price_next,
                        "delta": r.delta,
                        "revenue": r.revenue_pi,
                        "time": r.time_ti,
                        "boundary_retries": r.boundary_retries,
                    }
                    for r in self.records
                ],
            }
        )


def _theta_cell(theta: np.ndarray) -> str:
    return repr(float(theta[0])) if theta.size == 1 else ";".join(repr(float(t)) for t in theta)


def pooled_theta(records: Sequence[IterationRecord]) -> np.ndarray:
    """Sample-size-weighted mean of the per-iteration estimates."""
    if not records:
        raise ValueError("no records to pool")
    total = sum(r.k_i for r in records)
    acc = np.zeros_like(records[0].theta_i, dtype=float)
    for r in records:
        acc += r.k_i * r.theta_i
    return acc / total


def revenue_gap(
    revenue_pi: float,
    time_ti: float,
    theta_pooled,
    price_hat: float,
    cfg_base: ModelConfig,
    fam: ValueFamily,
    eps: float = 1e-12,
) -> float:
    """Relative gap between the realized revenue rate and the model prediction.

    An iteration with no revenue cannot certify anything, so the gap is
    defined as +inf there (the loop never stops on it).
    """
    if time_ti <= 0:
        raise ValueError("iteration time must be positive")
    if revenue_pi <= 0.0:
        return float("inf")
    rate = revenue_pi / time_ti
    predicted = expected_revenue(price_hat, theta_pooled, cfg_base, fam, eps=eps)
    return abs(rate - predicted) / rate


def run_pricing(
    cfg_base: ModelConfig,
    fam: ValueFamily,
    pcfg: PricingConfig,
    theta0=None,
    seed: int = 0,
    source: Optional[ObservationSource] = None,
) -> PricingTrace:
    """Run the estimate-then-reprice loop until the stopping rule fires.

    Either a true parameter (evaluation mode, simulated observations) or an
    explicit observation source must be provided.  Deterministic per seed in
    evaluation mode.
    """
    if source is None:
        if theta0 is None:
            raise ValueError("need either theta0 (evaluation mode) or an observation source")
        source = SimulatedSource(cfg_base, fam, theta0, seed=seed)

    records: list[IterationRecord] = []
    price = pcfg.initial_price
    k_min = pcfg.k1_min
    total_used = 0
    stopped = "max_iterations"

    for index in range(1, pcfg.max_iterations + 1):
        if pcfg.max_observations is not None and total_used + k_min > pcfg.max_observations:
            stopped = "budget"
            break

        cfg_i = cfg_base.with_price(price)
        path = source.collect(price, k_min)
        retries = 0
        retry_cap = max(pcfg.boundary_retry_factor * k_min, pcfg.boundary_retry_floor)
        while True:
            try:
                fit = fit_mle(path, cfg_i, fam)
            except ValueError:
                fit = None  # not enough informative data yet
            if fit is not None and not fit.boundary:
                break
            if retries >= retry_cap:
                raise RuntimeError(
                    f"iteration {index}: no interior estimate after {retries} extra observations"
                )
            path = concat_paths(path, source.collect(price, 1))
            retries += 1

        k_i = len(path)
        total_used += k_i

        pooled_num = k_i * fit.theta_hat + sum((r.k_i * r.theta_i for r in records), np.zeros(fam.dim))
        theta_pool = pooled_num / (k_i + sum(r.k_i for r in records))

        price_next = optimal_price(
            theta_pool, cfg_base, fam, bounds=pcfg.price_bounds, eps=pcfg.trunc_eps
        )
        if pcfg.delta_mode == "cumulative":
            gap_revenue = path.revenue + sum(r.revenue_pi for r in records)
            gap_time = path.total_time + sum(r.time_ti for r in records)
        else:
            gap_revenue, gap_time = path.revenue, path.total_time
        delta = revenue_gap(
            gap_revenue, gap_time, theta_pool, price_next, cfg_base, fam, eps=pcfg.trunc_eps
        )
        records.append(
            IterationRecord(
                index=index,
                k_i=k_i,
                theta_i=fit.theta_hat,
                theta_pooled=theta_pool,
                price_used=price,
                price_next=price_next,
                delta=delta,
                revenue_pi=path.revenue,
                time_ti=path.total_time,
                boundary_retries=retries,
            )
        )

        if delta < pcfg.tol:
            stopped = "tolerance"
            break
        price = price_next
        k_min = pcfg.grow(k_i if pcfg.grow_on == "actual" else k_min)

    if not records:
        raise RuntimeError("pricing loop produced no iterations (budget below k1_min?)")
    return PricingTrace(tuple(records), final_price=records[-1].price_next, stopped_reason=stopped)


@dataclass(frozen=True)
class TraceMetrics:
    """Evaluation of a pricing run against the known true parameter."""

    optimal_price: float
    optimal_revenue: float
    final_price: float
    final_fraction: float
    cumulative_fraction: float
    total_lost_revenue: float
    final_price_error: float
    iterations: int
    total_observations: int


def trace_metrics(
    trace: PricingTrace, theta0, cfg_base: ModelConfig, fam: ValueFamily, eps: float = 1e-12
) -> TraceMetrics:
    """Stationary revenue metrics of a finished run (evaluation mode only).

    Final fraction compares the last chosen price against the optimum, both
    under the true parameter.  The cumulative fraction weights each
    iteration's price by the time the system actually spent there.  Lost
    revenue charges each iteration the gap between the optimum and the
    model-predicted revenue at the price and estimate used in it.
    """
    p_star = optimal_price(theta0, cfg_base, fam, eps=eps)
    rev_star = expected_revenue(p_star, theta0, cfg_base, fam, eps=eps)

    final_rev = expected_revenue(trace.final_price, theta0, cfg_base, fam, eps=eps)
    num = 0.0
    den = 0.0
    lost = 0.0
    for r in trace.records:
        rev_at_used = expected_revenue(r.price_used, theta0, cfg_base, fam, eps=eps)
        num += r.time_ti * rev_at_used
        den += r.time_ti * rev_star
        rev_model = expected_revenue(r.price_used, r.theta_i, cfg_base, fam, eps=eps)
        lost += r.time_ti * (rev_star - rev_model)
    return TraceMetrics(
        optimal_price=p_star,
        optimal_revenue=rev_star,
        final_price=trace.final_price,
        final_fraction=final_rev / rev_star,
        cumulative_fraction=num / den,
        total_lost_revenue=lost,
        final_price_error=abs(trace.final_price - p_star),
        iterations=len(trace.records),
        total_observations=sum(r.k_i for r in trace.records),
    )
