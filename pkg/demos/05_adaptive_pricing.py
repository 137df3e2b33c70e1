"""Closing the loop: estimate, reprice, repeat.

Starting from an arbitrary price, each round collects a batch of queue
transitions, refits the value distribution, pools the estimates by sample
size, and moves the price to the revenue maximizer of the pooled model.  The
loop stops when the realized revenue rate agrees with the model's prediction
(or a learning budget runs out).
"""

from balkwise import (
    ExponentialFamily,
    ModelConfig,
    ParamSpace,
    PricingConfig,
    run_pricing,
    trace_metrics,
)

cfg = ModelConfig(lam=1.0, mu=1.0, cost_c=1.0, price=1.0)  # loop sets its own prices
fam = ExponentialFamily(ParamSpace([0.01], [5.0]))
theta0 = [0.02]

pcfg = PricingConfig(
    initial_price=15.0,
    k1_min=50,
    schedule="doubling",
    tol=0.01,
    max_observations=3000,
)
trace = run_pricing(cfg, fam, pcfg, theta0=theta0, seed=4)

print(f"{'iter':>4} {'batch':>6} {'theta_i':>9} {'pooled':>9} {'price':>8} "
      f"{'next':>8} {'rev rate':>9} {'gap':>7}")
for r in trace.records:
    rate = r.revenue_pi / r.time_ti if r.time_ti > 0 else float("nan")
    print(f"{r.index:4d} {r.k_i:6d} {r.theta_i[0]:9.4f} {r.theta_pooled[0]:9.4f} "
          f"{r.price_used:8.2f} {r.price_next:8.2f} {rate:9.3f} {r.delta:7.3f}")

metrics = trace_metrics(trace, theta0, cfg, fam)
print(f"\nstopped: {trace.stopped_reason} after {metrics.iterations} iterations, "
      f"{metrics.total_observations} observations")
print(f"final price {metrics.final_price:.2f} vs true optimum {metrics.optimal_price:.2f}")
print(f"earning {100 * metrics.final_fraction:.1f}% of the maximum stationary revenue;")
print(f"revenue earned while learning: {100 * metrics.cumulative_fraction:.1f}% of what "
      f"perfect pricing would have made")
