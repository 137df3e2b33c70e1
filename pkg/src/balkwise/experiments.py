"""Experiment drivers: the Monte-Carlo studies behind the simulation figures.

Every driver takes an ExperimentConfig, writes CSV (and optionally SVG) files
into the output directory, and returns a summary dict.  Replications are
seeded as (master seed, replication index) through numpy's SeedSequence, so
results are independent of execution order and identical whether run serially
or on a worker pool.  The BALKWISE_THREADS environment variable caps the pool
size.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .inference import fit_mle
from .model import ExponentialFamily, ModelConfig, ParamSpace, ValueFamily
from .pricing import PricingConfig, run_pricing, trace_metrics
from .simulator import SimOptions, simulate_path
from .stationary import asymptotic_std, expected_revenue, theoretical_sigma
from . import svgplot

EXPERIMENTS = (
    "score-convergence",
    "consistency",
    "normality",
    "std-vs-price",
    "revenue-vs-price",
    "pricing-tables",
)


def jarque_bera(sample) -> tuple[float, bool]:
    """Moments-based normality statistic and its 5%-level rejection flag.

    Returns (statistic, reject): n/6 * (skewness^2 + (kurtosis-3)^2/4),
    rejecting normality when the statistic exceeds the chi-square(2) 5%
    critical value 5.99.
    """
    x = np.asarray(sample, dtype=float)
    if x.size < 20:
        raise ValueError("normality test needs a sample of at least 20")
    std = x.std()
    if std == 0.0:
        raise ValueError("normality test undefined for a zero-variance sample")
    z = (x - x.mean()) / std
    skew = float(np.mean(z**3))
    kurt = float(np.mean(z**4))
    stat = x.size / 6.0 * (skew**2 + 0.25 * (kurt - 3.0) ** 2)
    return stat, stat > 5.99


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an experiment driver needs, JSON-loadable.

    k_list is used by the multi-sample-size experiments; k by single-size
    ones (each falls back to the other when only one is given).
    """

    experiment: str
    lam: float = 1.0
    mu: float = 1.0
    cost_c: float = 1.0
    price: float = 15.0
    family: str = "exponential"
    theta_lower: float = 1e-3
    theta_upper: float = 5.0
    theta0: float = 0.02
    k: Optional[int] = None
    k_list: tuple[int, ...] = ()
    replications: int = 200
    seed: int = 0
    price_grid: tuple[float, float, int] = (1.0, 250.0, 64)
    empirical_reps: int = 500
    out_dir: str = "out"
    fmt: str = "csv"
    workers: int = 1
    warmup_steps: int = 1000
    pricing_tol: float = 0.01
    pricing_budget: Optional[int] = 1530
    pricing_cells: tuple = (("increment", 2, 15.0), ("doubling", 100, 100.0))
    pricing_runs: int = 100

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(
                f"unknown experiment {self.experiment!r}; choose one of {', '.join(EXPERIMENTS)}"
            )
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.fmt not in ("csv", "json", "svg"):
            raise ValueError("format must be csv, json or svg")
        if self.family != "exponential":
            raise ValueError(f"unknown value family {self.family!r}")
        if not self.theta_lower < self.theta0 < self.theta_upper:
            raise ValueError(
                f"theta0={self.theta0} must lie strictly inside "
                f"[{self.theta_lower}, {self.theta_upper}]"
            )
        needs_k = self.experiment in ("score-convergence", "consistency", "normality")
        if needs_k and self.k is None and not self.k_list:
            raise ValueError(f"experiment {self.experiment} needs k or k_list")

    @property
    def model(self) -> ModelConfig:
        return ModelConfig(self.lam, self.mu, self.cost_c, self.price)

    @property
    def value_family(self) -> ValueFamily:
        return ExponentialFamily(ParamSpace([self.theta_lower], [self.theta_upper]))

    @property
    def sizes(self) -> tuple[int, ...]:
        if self.k_list:
            return tuple(self.k_list)
        return (self.k,)

    @staticmethod
    def from_json(raw: dict) -> "ExperimentConfig":
        model = raw.get("model", {})
        family = raw.get("family", {})
        kwargs = dict(
            experiment=raw.get("experiment", ""),
            lam=model.get("lambda", 1.0),
            mu=model.get("mu", 1.0),
            cost_c=model.get("cost_c", 1.0),
            price=model.get("price", 15.0),
            family=family.get("name", "exponential"),
            theta_lower=family.get("lower", 1e-3),
            theta_upper=family.get("upper", 5.0),
        )
        for key in (
            "theta0",
            "k",
            "replications",
            "seed",
            "empirical_reps",
            "out_dir",
            "workers",
            "warmup_steps",
            "pricing_tol",
            "pricing_budget",
            "pricing_runs",
        ):
            if key in raw:
                kwargs[key] = raw[key]
        if "k_list" in raw:
            kwargs["k_list"] = tuple(int(v) for v in raw["k_list"])
        if "price_grid" in raw:
            lo, hi, n = raw["price_grid"]
            kwargs["price_grid"] = (float(lo), float(hi), int(n))
        if "format" in raw:
            kwargs["fmt"] = raw["format"]
        if "pricing_cells" in raw:
            kwargs["pricing_cells"] = tuple(
                (str(s), int(k1), float(p1)) for s, k1, p1 in raw["pricing_cells"]
            )
        try:
            return ExperimentConfig(**kwargs)
        except TypeError as exc:
            raise ValueError(f"bad experiment config: {exc}") from exc


def rep_seed(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence((master, *key))


def resolve_workers(requested: int) -> int:
    cap = os.environ.get("BALKWISE_THREADS")
    workers = max(1, requested)
    if cap is not None:
        workers = min(workers, max(1, int(cap)))
    return min(workers, os.cpu_count() or 1)


def _pool_map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _fit_rep(job):
    """Simulate one path and fit it; shared by several drivers."""
    cfg_dict, lo, hi, theta0, k, master, rep, warmup = job
    cfg = ModelConfig(**cfg_dict)
    fam = ExponentialFamily(ParamSpace([lo], [hi]))
    seed = rep_seed(master, k, rep)
    path = simulate_path(
        cfg,
        fam,
        [theta0],
        SimOptions(steps=k, seed=seed, initial_state="stationary-warmup", warmup_steps=warmup),
    )
    fit = fit_mle(path, cfg, fam)
    return rep, float(fit.theta_hat[0]), float(fit.score_norm), bool(fit.boundary)


def _jobs(config: ExperimentConfig, k: int):
    cfg_dict = dict(lam=config.lam, mu=config.mu, cost_c=config.cost_c, price=config.price)
    return [
        (cfg_dict, config.theta_lower, config.theta_upper, config.theta0, k,
         config.seed, rep, config.warmup_steps)
        for rep in range(config.replications)
    ]


def _out(config: ExperimentConfig, name: str) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _fit_score_rep(job):
    cfg_dict, lo, hi, theta0, k, master, rep, warmup = job
    cfg = ModelConfig(**cfg_dict)
    fam = ExponentialFamily(ParamSpace([lo], [hi]))
    seed = rep_seed(master, k, rep)
    path = simulate_path(
        cfg,
        fam,
        [theta0],
        SimOptions(steps=k, seed=seed, initial_state="stationary-warmup", warmup_steps=warmup),
    )
    fit = fit_mle(path, cfg, fam)
    from .inference import score

    val = float(score(path, fit.theta_hat, cfg, fam)[0])
    return rep, float(fit.theta_hat[0]), val, bool(fit.boundary)


def exp_score_convergence(config: ExperimentConfig) -> dict:
    """Score at the fitted parameter across sample sizes and replications."""
    workers = resolve_workers(config.workers)
    rows = []
    spreads = {}
    for k in config.sizes:
        results = _pool_map(_fit_score_rep, _jobs(config, k), workers)
        results.sort()
        for rep, theta_hat, score_val, boundary in results:
            rows.append((k, rep, theta_hat, score_val))
        spreads[k] = float(np.std([r[2] for r in results]))
    path = _out(config, "score_convergence.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "rep", "theta_hat", "score"])
        for row in rows:
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])
    if config.fmt == "svg":
        svgplot.scatter(
            [(float(np.log10(r[0])), r[3]) for r in rows],
            _out(config, "score_convergence.svg"),
            x_label="log10 k",
            y_label="score at estimate",
        )
    return {"file": str(path), "score_std_by_k": spreads}


def exp_consistency(config: ExperimentConfig) -> dict:
    """Estimates across sample sizes plus log-likelihood profile curves."""
    workers = resolve_workers(config.workers)
    rows = []
    medians = {}
    for k in config.sizes:
        results = _pool_map(_fit_rep, _jobs(config, k), workers)
        results.sort()
        errs = []
        for rep, theta_hat, _, boundary in results:
            rows.append((k, rep, theta_hat, abs(theta_hat - config.theta0)))
            errs.append(abs(theta_hat - config.theta0))
        medians[k] = float(np.median(errs))
    path = _out(config, "consistency.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "rep", "theta_hat", "abs_error"])
        for row in rows:
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3])])

    # likelihood profile on one fixed path per sample size
    from .inference import log_likelihood

    cfg, fam = config.model, config.value_family
    curve_path = _out(config, "loglik_profile.csv")
    thetas = np.linspace(config.theta_lower, min(config.theta_upper, 10 * config.theta0), 201)
    with open(curve_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "theta", "loglik"])
        for k in config.sizes:
            sim = simulate_path(
                cfg,
                fam,
                [config.theta0],
                SimOptions(steps=k, seed=rep_seed(config.seed, k, 0),
                           initial_state="stationary-warmup", warmup_steps=config.warmup_steps),
            )
            for t in thetas:
                w.writerow([k, repr(float(t)), repr(log_likelihood(sim, [t], cfg, fam))])
    summary_path = _out(config, "consistency_summary.csv")
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "median_abs_error"])
        for k in config.sizes:
            w.writerow([k, repr(medians[k])])
    return {"file": str(path), "median_abs_error_by_k": medians}


def exp_normality(config: ExperimentConfig) -> dict:
    """Standardized estimation errors and the moments-based normality verdict.

    Errors are standardized by the estimator-exact asymptotic std (jump
    weighting, transition accounting) at the experiment's price; boundary
    fits are excluded from the test and counted.
    """
    workers = resolve_workers(config.workers)
    cfg, fam = config.model, config.value_family
    rows = []
    verdicts = {}
    for k in config.sizes:
        sigma = theoretical_sigma([config.theta0], cfg, fam)
        std_theory = 1.0 / np.sqrt(float(sigma[0, 0]))
        results = _pool_map(_fit_rep, _jobs(config, k), workers)
        results.sort()
        z_vals, rel_errors, n_boundary = [], [], 0
        for rep, theta_hat, _, boundary in results:
            z = float(np.sqrt(k) * (theta_hat - config.theta0) / std_theory)
            rel = (theta_hat - config.theta0) / config.theta0
            rows.append((k, rep, theta_hat, z, int(boundary)))
            if boundary:
                n_boundary += 1
            else:
                z_vals.append(z)
                rel_errors.append(rel)
        stat, reject = jarque_bera(z_vals)
        verdicts[k] = {
            "jb_stat": float(stat),
            "reject_normality": bool(reject),
            "mean_z": float(np.mean(z_vals)),
            "mean_rel_error": float(np.mean(rel_errors)),
            "boundary_excluded": n_boundary,
            "theoretical_std": float(std_theory),
        }
    path = _out(config, "normality.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "rep", "theta_hat", "z", "boundary"])
        for row in rows:
            w.writerow([row[0], row[1], repr(row[2]), repr(row[3]), row[4]])
    with open(_out(config, "normality_summary.json"), "w") as fh:
        json.dump(verdicts, fh, indent=2)
    if config.fmt == "svg":
        for k in config.sizes:
            zs = [r[3] for r in rows if r[0] == k and not r[4]]
            svgplot.histogram(zs, _out(config, f"normality_k{k}.svg"), bins=40)
    return {"file": str(path), "verdicts": verdicts}


def _empirical_std_rep(job):
    cfg_dict, lo, hi, theta0, k, master, rep, warmup, price = job
    cfg = ModelConfig(**cfg_dict).with_price(price)
    fam = ExponentialFamily(ParamSpace([lo], [hi]))
    # price folded into the seed key so each grid point gets its own stream
    seed = rep_seed(master, k, rep, int(price * 1000))
    path = simulate_path(
        cfg,
        fam,
        [theta0],
        SimOptions(steps=k, seed=seed, initial_state="stationary-warmup", warmup_steps=warmup),
    )
    fit = fit_mle(path, cfg, fam)
    return float(fit.theta_hat[0]), bool(fit.boundary)


def exp_std_vs_price(config: ExperimentConfig) -> dict:
    """Theoretical std-vs-price curve with a Monte-Carlo overlay.

    The theoretical curve uses the curve convention of asymptotic_std; the
    empirical overlay fits empirical_reps simulated paths per price point
    and reports the sample std of the sqrt(k)-scaled errors.
    """
    cfg, fam = config.model, config.value_family
    lo, hi, n = config.price_grid
    prices = np.linspace(lo, hi, n)
    workers = resolve_workers(config.workers)

    theory = []
    for p in prices:
        try:
            theory.append(float(asymptotic_std(p, [config.theta0], cfg, fam)[0]))
        except (ValueError, RuntimeError):
            theory.append(float("nan"))
    path = _out(config, "std_vs_price.csv")
    from .stationary import write_curve_csv

    with open(path, "w", newline="") as fh:
        write_curve_csv(fh, prices, theory, "std")

    empirical_rows = []
    cfg_dict = dict(lam=config.lam, mu=config.mu, cost_c=config.cost_c, price=config.price)
    for k in config.sizes if (config.k or config.k_list) else (1000,):
        for p in prices:
            jobs = [
                (cfg_dict, config.theta_lower, config.theta_upper, config.theta0, k,
                 config.seed, rep, config.warmup_steps, float(p))
                for rep in range(config.empirical_reps)
            ]
            fits = _pool_map(_empirical_std_rep, jobs, workers)
            interior = [t for t, boundary in fits if not boundary]
            if len(interior) >= 2:
                emp = float(np.std(np.sqrt(k) * (np.array(interior) - config.theta0), ddof=1))
            else:
                emp = float("nan")
            empirical_rows.append((float(p), k, emp, len(interior)))
    emp_path = _out(config, "std_vs_price_empirical.csv")
    with open(emp_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["price", "k", "empirical_std", "fits_used"])
        for row in empirical_rows:
            w.writerow([repr(row[0]), row[1], repr(row[2]), row[3]])
    if config.fmt == "svg":
        svgplot.line(
            list(zip(prices.tolist(), theory)),
            _out(config, "std_vs_price.svg"),
            x_label="price",
            y_label="asymptotic std",
        )
    return {"file": str(path), "empirical_file": str(emp_path)}


def exp_revenue_vs_price(config: ExperimentConfig) -> dict:
    """Stationary revenue as a function of price."""
    cfg, fam = config.model, config.value_family
    lo, hi, n = config.price_grid
    prices = np.linspace(lo, hi, n)
    values = []
    for p in prices:
        try:
            values.append(expected_revenue(p, [config.theta0], cfg, fam))
        except (ValueError, RuntimeError):
            values.append(float("nan"))
    path = _out(config, "revenue_vs_price.csv")
    from .stationary import write_curve_csv

    with open(path, "w", newline="") as fh:
        write_curve_csv(fh, prices, values, "revenue")
    if config.fmt == "svg":
        svgplot.line(
            list(zip(prices.tolist(), values)),
            _out(config, "revenue_vs_price.svg"),
            x_label="price",
            y_label="revenue rate",
        )
    return {"file": str(path)}


TABLE_ROW_LABELS = (
    "Iterations",
    "Total number of observations used for learning",
    "Final stationary fraction of max revenue",
    "Stationary cumulative fraction of max revenue",
    "Total lost revenue",
    "Mean error of final price",
    "Std of final price error",
    "Failed runs",
)


def _pricing_run(job):
    cfg_dict, lo, hi, theta0, schedule, k1, p1, tol, budget, master, cell_idx, rep = job
    cfg = ModelConfig(**cfg_dict)
    fam = ExponentialFamily(ParamSpace([lo], [hi]))
    pcfg = PricingConfig(
        initial_price=p1,
        k1_min=k1,
        schedule=schedule,
        tol=tol,
        max_observations=budget,
        grow_on="nominal",
        delta_mode="cumulative",
        boundary_retry_floor=150,
    )
    seed = int(np.random.SeedSequence((master, cell_idx, rep)).generate_state(1)[0])
    try:
        trace = run_pricing(cfg, fam, pcfg, theta0=[theta0], seed=seed)
    except RuntimeError:
        return None
    m = trace_metrics(trace, [theta0], cfg, fam)
    return (
        m.iterations,
        m.total_observations,
        m.final_fraction,
        m.cumulative_fraction,
        m.total_lost_revenue,
        m.final_price_error,
    )


def exp_pricing_tables(config: ExperimentConfig) -> dict:
    """Summary metrics of seeded pricing runs over a grid of loop settings."""
    workers = resolve_workers(config.workers)
    cfg_dict = dict(lam=config.lam, mu=config.mu, cost_c=config.cost_c, price=config.price)
    cells = {}
    for cell_idx, (schedule, k1, p1) in enumerate(config.pricing_cells):
        jobs = [
            (cfg_dict, config.theta_lower, config.theta_upper, config.theta0,
             schedule, k1, p1, config.pricing_tol, config.pricing_budget,
             config.seed, cell_idx, rep)
            for rep in range(config.pricing_runs)
        ]
        results = _pool_map(_pricing_run, jobs, workers)
        ok = [r for r in results if r is not None]
        failed = len(results) - len(ok)
        arr = np.array(ok, dtype=float) if ok else np.zeros((0, 6))
        key = f"{schedule},k1={k1},p1={p1:g}"
        cells[key] = {
            "Iterations": float(arr[:, 0].mean()) if len(arr) else float("nan"),
            "Total number of observations used for learning": float(arr[:, 1].mean()) if len(arr) else float("nan"),
            "Final stationary fraction of max revenue": float(arr[:, 2].mean()) if len(arr) else float("nan"),
            "Stationary cumulative fraction of max revenue": float(arr[:, 3].mean()) if len(arr) else float("nan"),
            "Total lost revenue": float(arr[:, 4].mean()) if len(arr) else float("nan"),
            "Mean error of final price": float(arr[:, 5].mean()) if len(arr) else float("nan"),
            "Std of final price error": float(arr[:, 5].std(ddof=1)) if len(arr) > 1 else float("nan"),
            "Failed runs": failed,
            "unreliable": failed > 0.05 * config.pricing_runs,
        }
    path = _out(config, "pricing_tables.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schedule", "k1_min", "p1", "metric", "value"])
        for cell_idx, (schedule, k1, p1) in enumerate(config.pricing_cells):
            key = f"{schedule},k1={k1},p1={p1:g}"
            for label in TABLE_ROW_LABELS:
                w.writerow([schedule, k1, repr(float(p1)), label, repr(float(cells[key][label]))])
    with open(_out(config, "pricing_tables.json"), "w") as fh:
        json.dump(cells, fh, indent=2)
    return {"file": str(path), "cells": cells}


DRIVERS = {
    "score-convergence": exp_score_convergence,
    "consistency": exp_consistency,
    "normality": exp_normality,
    "std-vs-price": exp_std_vs_price,
    "revenue-vs-price": exp_revenue_vs_price,
    "pricing-tables": exp_pricing_tables,
}


def run_experiment(config: ExperimentConfig) -> dict:
    return DRIVERS[config.experiment](config)
