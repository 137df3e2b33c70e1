"""Seeded simulation of the observable (balking-censored) queue.

Two generators of the same law: ``simulate_path`` drives the thinned jump
chain directly from the state-dependent joining rates (fast, the default),
while ``simulate_full_arrivals`` plays out every potential customer, draws an
individual service value, applies the joining rule and discards balkers.  The
second exists so tests can verify the thinning equivalence end to end.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .model import ModelConfig, ValueFamily, offered_reward

STATIONARY_WARMUP = "stationary-warmup"
DEFAULT_WARMUP_STEPS = 1000


class AbsorbingStateError(RuntimeError):
    """No customer ever joins the empty queue: the chain cannot move."""


@dataclass(frozen=True)
class QueuePath:
    """An observed trajectory of the jump chain.

    states  -- queue lengths Q_0..Q_k (k+1 entries)
    ups     -- up-move indicators for each of the k transitions
    holds   -- holding time spent in the pre-state of each transition
    revenue -- price collected over the recorded transitions
    informative_mask -- marks transitions whose pre-state is informative
        about the parameter (None when unknown, e.g. after CSV import
        without a family)
    """

    states: np.ndarray
    ups: np.ndarray
    holds: np.ndarray
    revenue: float
    total_time: float
    informative_mask: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.ups)

    @property
    def pre_states(self) -> np.ndarray:
        return self.states[:-1]

    def validate(self) -> None:
        """Check the structural invariants; raises AssertionError on breach."""
        k = len(self.ups)
        assert self.states.shape == (k + 1,)
        assert self.holds.shape == (k,)
        steps = np.diff(self.states)
        assert np.all(np.abs(steps) == 1)
        assert np.all(self.states >= 0)
        assert np.all(self.ups == (steps > 0))
        assert np.all(self.ups[self.pre_states == 0])
        assert np.all(self.holds >= 0)
        assert np.isclose(self.total_time, float(self.holds.sum()))

    def to_csv(self, fileobj) -> None:
        """Serialize as ``step,state,up,hold``; row 0 carries the initial state."""
        writer = csv.writer(fileobj)
        writer.writerow(["step", "state", "up", "hold"])
        writer.writerow([0, int(self.states[0]), "", ""])
        for i in range(len(self.ups)):
            writer.writerow(
                [i + 1, int(self.states[i + 1]), int(self.ups[i]), repr(float(self.holds[i]))]
            )

    @staticmethod
    def from_csv(
        fileobj,
        cfg: Optional[ModelConfig] = None,
        fam: Optional[ValueFamily] = None,
        theta=None,
    ) -> "QueuePath":
        """Rebuild a path from its CSV form.

        Revenue needs the price, so it is zero unless ``cfg`` is given; the
        informative mask needs the family and a parameter as well.
        """
        reader = csv.reader(fileobj)
        header = next(reader)
        if header != ["step", "state", "up", "hold"]:
            raise ValueError(f"unexpected path CSV header: {header}")
        states, ups, holds = [], [], []
        for row in reader:
            states.append(int(row[1]))
            if row[2] != "":
                ups.append(int(row[2]) == 1)
                holds.append(float(row[3]))
        states = np.asarray(states, dtype=np.int64)
        ups = np.asarray(ups, dtype=bool)
        holds = np.asarray(holds, dtype=float)
        revenue = cfg.price * int(ups.sum()) if cfg is not None else 0.0
        mask = None
        if cfg is not None and fam is not None and theta is not None:
            mask = _informative_mask(states[:-1], theta, cfg, fam)
        return QueuePath(states, ups, holds, revenue, float(holds.sum()), mask)


def concat_paths(first: QueuePath, second: QueuePath) -> QueuePath:
    """Join two consecutive path segments ending/starting at the same state."""
    if first.states[-1] != second.states[0]:
        raise ValueError("paths do not share a boundary state")
    mask = None
    if first.informative_mask is not None and second.informative_mask is not None:
        mask = np.concatenate([first.informative_mask, second.informative_mask])
    return QueuePath(
        states=np.concatenate([first.states, second.states[1:]]),
        ups=np.concatenate([first.ups, second.ups]),
        holds=np.concatenate([first.holds, second.holds]),
        revenue=first.revenue + second.revenue,
        total_time=first.total_time + second.total_time,
        informative_mask=mask,
    )


@dataclass(frozen=True)
class SimOptions:
    """How long, from where, and with which seed to simulate.

    initial_state may be a nonnegative integer or the string
    ``"stationary-warmup"``, in which case the chain starts empty, runs a
    burn-in of ``warmup_steps`` (default 1000) and keeps only what follows.
    An integer initial state combined with a positive ``warmup_steps`` also
    burns in, starting from that state.
    """

    steps: int
    seed: Union[int, np.random.SeedSequence] = 0
    initial_state: Union[int, str] = 0
    warmup_steps: Optional[int] = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.warmup_steps is not None and self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if isinstance(self.initial_state, str):
            if self.initial_state != STATIONARY_WARMUP:
                raise ValueError(f"unknown initial_state {self.initial_state!r}")
        elif self.initial_state < 0:
            raise ValueError("initial_state must be >= 0")

    def resolve(self) -> tuple[int, int]:
        """Return (start_state, warmup) with defaults applied."""
        if self.initial_state == STATIONARY_WARMUP:
            warmup = DEFAULT_WARMUP_STEPS if self.warmup_steps is None else self.warmup_steps
            return 0, warmup
        return int(self.initial_state), int(self.warmup_steps or 0)


def _joining_rates(theta, cfg: ModelConfig, fam: ValueFamily, lo: int, hi: int) -> np.ndarray:
    """Joining rate for states lo..hi-1, vectorized."""
    q = np.arange(lo, hi)
    thresholds = cfg.price + (q + 1) * cfg.cost_c / cfg.mu
    return cfg.lam * np.asarray(fam.sf(thresholds, theta), dtype=float)


def _informative_mask(pre_states, theta, cfg: ModelConfig, fam: ValueFamily) -> np.ndarray:
    surv = np.asarray(fam.sf(offered_reward(pre_states, cfg), theta), dtype=float)
    return (pre_states > 0) & (surv > 0.0) & (surv < 1.0)


def _walk(rng, steps: int, start: int, theta, cfg: ModelConfig, fam: ValueFamily):
    """Run the jump chain for ``steps`` transitions; returns (states, lam_table)."""
    mu = cfg.mu
    lam_tab: list[float] = []
    pup: list[float] = []

    def grow(upto: int) -> None:
        lo = len(lam_tab)
        hi = max(upto, lo + 64)
        rates = _joining_rates(theta, cfg, fam, lo, hi)
        lam_tab.extend(rates.tolist())
        pup.extend((rates / (rates + mu)).tolist())

    grow(start + 2)
    if lam_tab[0] <= 0.0:
        raise AbsorbingStateError(
            "no customer ever joins the empty queue (joining rate 0 at state 0)"
        )

    draws = rng.random(steps).tolist()
    states = np.empty(steps + 1, dtype=np.int64)
    states[0] = start
    q = start
    for i in range(steps):
        if q == 0:
            q = 1
        elif draws[i] < pup[q]:
            q += 1
            if q + 1 >= len(pup):
                grow(q + 2)
        else:
            q -= 1
        states[i + 1] = q
    return states, np.asarray(lam_tab)


def simulate_path(
    cfg: ModelConfig, fam: ValueFamily, theta0, opts: SimOptions
) -> QueuePath:
    """Simulate the censored jump chain with holding times and revenue.

    From state q > 0 the chain waits Exp(lam_q + mu) and moves up with
    probability lam_q / (lam_q + mu); from the empty queue it waits for the
    next effective arrival, Exp(lam_0), and moves up.  Deterministic given
    the seed.  Burn-in transitions are simulated and discarded; the final
    burn-in state becomes Q_0.
    """
    theta0 = fam.param_space.require(theta0)
    start, warmup = opts.resolve()
    rng = np.random.default_rng(opts.seed)

    all_states, lam_tab = _walk(rng, warmup + opts.steps, start, theta0, cfg, fam)
    states = all_states[warmup:]
    pre = states[:-1]
    ups = states[1:] > pre

    exit_rates = np.where(pre > 0, lam_tab[pre] + cfg.mu, lam_tab[0])
    holds = rng.standard_exponential(opts.steps) / exit_rates

    return QueuePath(
        states=states,
        ups=ups,
        holds=holds,
        revenue=cfg.price * int(ups.sum()),
        total_time=float(holds.sum()),
        informative_mask=_informative_mask(pre, theta0, cfg, fam),
    )


def simulate_full_arrivals(
    cfg: ModelConfig, fam: ValueFamily, theta0, opts: SimOptions
) -> QueuePath:
    """Per-customer simulation with the same output law as simulate_path.

    Every potential arrival of the Poisson(lam) stream draws its own service
    value; a customer facing q in the system joins only when the value covers
    the offered-reward threshold at q.  Balking customers leave no trace in
    the recorded path.  Kept as the independent oracle for the thinning
    equivalence;prefer simulate_path for anything long.
    """
    theta0 = fam.param_space.require(theta0)
    if float(fam.sf(offered_reward(0, cfg), theta0)) <= 0.0:
        raise AbsorbingStateError(
            "no customer ever joins the empty queue (joining rate 0 at state 0)"
        )
    start, warmup = opts.resolve()
    rng = np.random.default_rng(opts.seed)
    total = warmup + opts.steps

    states = np.empty(total + 1, dtype=np.int64)
    ups = np.empty(total, dtype=bool)
    holds = np.empty(total, dtype=float)

    states[0] = q = start
    now = 0.0
    last_transition = 0.0
    next_arrival = rng.exponential(1.0 / cfg.lam)
    next_departure = rng.exponential(1.0 / cfg.mu) if q > 0 else np.inf

    recorded = 0
    while recorded < total:
        if next_arrival <= next_departure:
            now = next_arrival
            next_arrival = now + rng.exponential(1.0 / cfg.lam)
            value = fam.quantile(rng.random(), theta0)
            if value >= offered_reward(q, cfg):
                q += 1
                if q == 1:
                    next_departure = now + rng.exponential(1.0 / cfg.mu)
                states[recorded + 1] = q
                ups[recorded] = True
                holds[recorded] = now - last_transition
                last_transition = now
                recorded += 1
        else:
            now = next_departure
            q -= 1
            next_departure = now + rng.exponential(1.0 / cfg.mu) if q > 0 else np.inf
            states[recorded + 1] = q
            ups[recorded] = False
            holds[recorded] = now - last_transition
            last_transition = now
            recorded += 1

    states = states[warmup:]
    ups = ups[warmup:]
    holds = holds[warmup:]
    pre = states[:-1]
    return QueuePath(
        states=states,
        ups=ups,
        holds=holds,
        revenue=cfg.price * int(ups.sum()),
        total_time=float(holds.sum()),
        informative_mask=_informative_mask(pre, theta0, cfg, fam),
    )


@dataclass(frozen=True)
class PathStats:
    up_count: int
    down_count: int
    effective_m: int
    jump_occupancy: np.ndarray
    time_occupancy: np.ndarray
    revenue_rate: float


def path_stats(path: QueuePath) -> PathStats:
    """Summary counts and occupancies of a path.

    Occupancy is reported two ways over the pre-states of each transition:
    jump-weighted (fraction of steps spent at q) and time-weighted (fraction
    of total time spent at q).
    """
    if len(path) == 0:
        raise ValueError("path has no transitions")
    pre = path.pre_states
    up_count = int(path.ups.sum())
    jump = np.bincount(pre) / len(path)
    time_w = np.bincount(pre, weights=path.holds) / path.total_time
    if path.informative_mask is not None:
        effective = int(path.informative_mask.sum())
    else:
        effective = int((pre > 0).sum())
    return PathStats(
        up_count=up_count,
        down_count=len(path) - up_count,
        effective_m=effective,
        jump_occupancy=jump,
        time_occupancy=time_w,
        revenue_rate=path.revenue / path.total_time,
    )
