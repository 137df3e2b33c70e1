"""Command-line harness.

Subcommands: simulate, fit, stationary, revenue, price-opt, autoprice,
experiment <name>.  A JSON config file supplies defaults; explicit flags win.
Exit codes: 0 success, 1 validation error (bad flags or config), 2 runtime
error (simulation or numerical failure).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .inference import confidence_interval, fit_mle
from .model import ExponentialFamily, ModelConfig, ParamSpace
from .pricing import PricingConfig, run_pricing, trace_metrics
from .simulator import QueuePath, SimOptions, path_stats, simulate_path
from .stationary import (
    asymptotic_std,
    expected_revenue,
    min_std_price,
    optimal_price,
    revenue_curve,
    stationary_distribution,
    std_curve,
    write_curve_csv,
)


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors (exit 1), not usage exits."""

    def error(self, message):
        raise ValueError(message)


def _add_model_flags(p):
    p.add_argument("--lam", type=float, default=None, help="arrival rate")
    p.add_argument("--mu", type=float, default=None, help="service rate")
    p.add_argument("--cost", type=float, default=None, help="waiting cost per unit time")
    p.add_argument("--price", type=float, default=None, help="admission price")
    p.add_argument("--theta-lower", type=float, default=None)
    p.add_argument("--theta-upper", type=float, default=None)


def _add_common_flags(p):
    p.add_argument("--config", type=str, default=None, help="JSON config with defaults")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--format", dest="fmt", choices=["csv", "json", "svg"], default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="balkwise", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[], help="simulate a censored queue path")
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="number of transitions")
    p.add_argument("--initial-state", type=str, default=None)
    p.add_argument("--warmup", type=int, default=None)

    p = sub.add_parser("fit", help="fit the value distribution from a path CSV")
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--input", type=str, required=True, help="path CSV (step,state,up,hold)")
    p.add_argument("--level", type=float, default=None, help="also report a confidence interval")

    p = sub.add_parser("stationary", help="truncated stationary distribution")
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--weighting", choices=["time", "jump"], default="time")
    p.add_argument("--eps", type=float, default=1e-12)

    p = sub.add_parser("revenue", help="stationary revenue at a price or over a grid")
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--price-grid", type=str, default=None, help="lo:hi:n")

    p = sub.add_parser("price-opt", help="revenue-maximizing and std-minimizing prices")
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--theta", type=float, default=None)

    p = sub.add_parser("autoprice", help="run the iterative pricing loop (simulated)")
    _add_common_flags(p)
    _add_model_flags(p)
    p.add_argument("--theta0", type=float, default=None)
    p.add_argument("--p1", type=float, default=None, help="initial price")
    p.add_argument("--k1-min", type=int, default=None)
    p.add_argument("--schedule", choices=["increment", "doubling", "custom"], default=None)
    p.add_argument("--growth-multiplier", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--budget", type=int, default=None, help="total observation cap")
    p.add_argument("--max-iterations", type=int, default=None)

    p = sub.add_parser("experiment", help="run a named Monte-Carlo experiment")
    _add_common_flags(p)
    p.add_argument("name", choices=list(EXPERIMENTS))

    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ValueError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file is not valid JSON: {exc}") from exc


def _pick(flag, cfg: dict, key: str, default):
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _model_from(args, cfg) -> ModelConfig:
    model = cfg.get("model", {})
    return ModelConfig(
        lam=_pick(args.lam, model, "lambda", 1.0),
        mu=_pick(args.mu, model, "mu", 1.0),
        cost_c=_pick(args.cost, model, "cost_c", 1.0),
        price=_pick(args.price, model, "price", 15.0),
    )


def _family_from(args, cfg) -> ExponentialFamily:
    family = cfg.get("family", {})
    lower = _pick(args.theta_lower, family, "lower", 1e-3)
    upper = _pick(args.theta_upper, family, "upper", 5.0)
    return ExponentialFamily(ParamSpace([lower], [upper]))


def _out_dir(args, cfg) -> Path:
    out = Path(_pick(args.out, cfg, "out_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    cfg_file = _load_config(args.config)
    cfg = _model_from(args, cfg_file)
    fam = _family_from(args, cfg_file)
    theta0 = _pick(args.theta0, cfg_file, "theta0", None)
    if theta0 is None:
        raise ValueError("simulate needs --theta0 (true parameter)")
    k = _pick(args.k, cfg_file, "k", None)
    if k is None:
        raise ValueError("simulate needs --k (number of transitions)")
    initial = _pick(args.initial_state, cfg_file, "initial_state", "0")
    initial = initial if initial == "stationary-warmup" else int(initial)
    opts = SimOptions(
        steps=int(k),
        seed=_pick(args.seed, cfg_file, "seed", 0),
        initial_state=initial,
        warmup_steps=_pick(args.warmup, cfg_file, "warmup_steps", None),
    )
    path = simulate_path(cfg, fam, [theta0], opts)
    out = _out_dir(args, cfg_file)
    with open(out / "path.csv", "w", newline="") as fh:
        path.to_csv(fh)
    stats = path_stats(path)
    with open(out / "path_stats.json", "w") as fh:
        json.dump(
            {
                "up_count": stats.up_count,
                "down_count": stats.down_count,
                "effective_m": stats.effective_m,
                "revenue": path.revenue,
                "total_time": path.total_time,
                "revenue_rate": stats.revenue_rate,
            },
            fh,
            indent=2,
        )
    print(f"wrote {out / 'path.csv'} ({len(path)} transitions)")
    return 0


def _cmd_fit(args) -> int:
    cfg_file = _load_config(args.config)
    cfg = _model_from(args, cfg_file)
    fam = _family_from(args, cfg_file)
    try:
        with open(args.input) as fh:
            path = QueuePath.from_csv(fh, cfg=cfg)
    except FileNotFoundError as exc:
        raise ValueError(f"input path file not found: {args.input}") from exc
    fit = fit_mle(path, cfg, fam)
    payload = json.loads(fit.to_json())
    if args.level is not None:
        ci = confidence_interval(fit, args.level)
        payload["confidence_interval"] = {"level": args.level, "bounds": ci.tolist()}
    text = json.dumps(payload, indent=2)
    if args.out is not None:
        out = _out_dir(args, cfg_file)
        (out / "fit.json").write_text(text)
        print(f"wrote {out / 'fit.json'}")
    else:
        print(text)
    return 0


def _cmd_stationary(args) -> int:
    cfg_file = _load_config(args.config)
    cfg = _model_from(args, cfg_file)
    fam = _family_from(args, cfg_file)
    theta = _pick(args.theta, cfg_file, "theta0", None)
    if theta is None:
        raise ValueError("stationary needs --theta")
    dist = stationary_distribution([theta], cfg, fam, eps=args.eps, weighting=args.weighting)
    out = _out_dir(args, cfg_file)
    target = out / f"stationary_{args.weighting}.csv"
    with open(target, "w", newline="") as fh:
        fh.write("q,prob\n")
        for q, prob in enumerate(dist.probs):
            fh.write(f"{q},{float(prob)!r}\n")
    print(f"wrote {target} (truncated at {dist.qstar}, tail bound {dist.tail_bound:.2e})")
    return 0


def _parse_grid(spec: str):
    try:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    except Exception as exc:
        raise ValueError(f"bad price grid {spec!r}; expected lo:hi:n") from exc


def _cmd_revenue(args) -> int:
    cfg_file = _load_config(args.config)
    cfg = _model_from(args, cfg_file)
    fam = _family_from(args, cfg_file)
    theta = _pick(args.theta, cfg_file, "theta0", None)
    if theta is None:
        raise ValueError("revenue needs --theta")
    if args.price_grid is not None:
        prices = _parse_grid(args.price_grid)
        values = revenue_curve(prices, [theta], cfg, fam)
        out = _out_dir(args, cfg_file)
        with open(out / "revenue_curve.csv", "w", newline="") as fh:
            write_curve_csv(fh, prices, values, "revenue")
        print(f"wrote {out / 'revenue_curve.csv'}")
    else:
        value = expected_revenue(cfg.price, [theta], cfg, fam)
        print(json.dumps({"price": cfg.price, "revenue": value}))
    return 0


def _cmd_price_opt(args) -> int:
    cfg_file = _load_config(args.config)
    cfg = _model_from(args, cfg_file)
    fam = _family_from(args, cfg_file)
    theta = _pick(args.theta, cfg_file, "theta0", None)
    if theta is None:
        raise ValueError("price-opt needs --theta")
    best = optimal_price([theta], cfg, fam)
    best_std = min_std_price([theta], cfg, fam)
    payload = {
        "optimal_price": best,
        "max_revenue": expected_revenue(best, [theta], cfg, fam),
        "min_std_price": best_std,
        "min_std": float(asymptotic_std(best_std, [theta], cfg, fam)[0]),
    }
    print(json.dumps(payload, indent=2))
    return 0


def _cmd_autoprice(args) -> int:
    cfg_file = _load_config(args.config)
    cfg = _model_from(args, cfg_file)
    fam = _family_from(args, cfg_file)
    pricing_cfg = cfg_file.get("pricing", {})
    theta0 = _pick(args.theta0, cfg_file, "theta0", None)
    if theta0 is None:
        raise ValueError("autoprice needs --theta0 (true parameter for simulation)")
    pcfg = PricingConfig(
        initial_price=_pick(args.p1, pricing_cfg, "p1", 15.0),
        k1_min=_pick(args.k1_min, pricing_cfg, "k1_min", 2),
        schedule=_pick(args.schedule, pricing_cfg, "schedule", "increment"),
        growth_multiplier=_pick(args.growth_multiplier, pricing_cfg, "growth_multiplier", None),
        tol=_pick(args.tol, pricing_cfg, "tol", 0.01),
        max_iterations=_pick(args.max_iterations, pricing_cfg, "max_iterations", 10_000),
        max_observations=_pick(args.budget, pricing_cfg, "budget", None),
    )
    seed = _pick(args.seed, cfg_file, "seed", 0)
    trace = run_pricing(cfg, fam, pcfg, theta0=[theta0], seed=seed)
    out = _out_dir(args, cfg_file)
    with open(out / "pricing_trace.csv", "w", newline="") as fh:
        trace.to_csv(fh)
    (out / "pricing_trace.json").write_text(trace.to_json())
    metrics = trace_metrics(trace, [theta0], cfg, fam)
    with open(out / "pricing_metrics.json", "w") as fh:
        json.dump(
            {
                "final_price": metrics.final_price,
                "optimal_price": metrics.optimal_price,
                "final_fraction": metrics.final_fraction,
                "cumulative_fraction": metrics.cumulative_fraction,
                "total_lost_revenue": metrics.total_lost_revenue,
                "iterations": metrics.iterations,
                "total_observations": metrics.total_observations,
                "stopped_reason": trace.stopped_reason,
            },
            fh,
            indent=2,
        )
    print(
        f"final price {trace.final_price:.3f} after {metrics.iterations} iterations "
        f"({trace.stopped_reason}); wrote {out / 'pricing_trace.csv'}"
    )
    return 0


def _cmd_experiment(args) -> int:
    raw = _load_config(args.config)
    raw["experiment"] = args.name
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = args.out
    if args.replications is not None:
        raw["replications"] = args.replications
    if args.fmt is not None:
        raw["format"] = args.fmt
    config = ExperimentConfig.from_json(raw)
    summary = run_experiment(config)
    print(json.dumps(summary, indent=2, default=str))
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "stationary": _cmd_stationary,
    "revenue": _cmd_revenue,
    "price-opt": _cmd_price_opt,
    "autoprice": _cmd_autoprice,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
