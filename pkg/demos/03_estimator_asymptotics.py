"""Consistency and asymptotic normality of the estimator, empirically.

The estimate converges to the truth as the path grows, and the scaled errors
sqrt(k) * (theta_hat - theta0) approach a normal law whose variance is the
inverse of a computable information constant.  A few hundred replications per
sample size make both effects visible.
"""

import numpy as np

from balkwise import (
    ExponentialFamily,
    ModelConfig,
    ParamSpace,
    SimOptions,
    fit_mle,
    jarque_bera,
    simulate_path,
    theoretical_sigma,
)

cfg = ModelConfig(lam=1.0, mu=1.0, cost_c=1.0, price=15.0)
fam = ExponentialFamily(ParamSpace([1e-3], [5.0]))
theta0 = 0.02
reps = 300

sigma = theoretical_sigma([theta0], cfg, fam)[0, 0]
print(f"information constant at the truth: {sigma:.3f} "
      f"(asymptotic std of sqrt(k)-scaled errors: {1 / np.sqrt(sigma):.4f})")

print(f"\n{'k':>7}  median|err|  empirical std(z)  normality rejected?")
for k in (100, 5_000, 50_000):
    errors = []
    for rep in range(reps):
        path = simulate_path(
            cfg, fam, [theta0],
            SimOptions(steps=k, seed=np.random.SeedSequence((33, k, rep)),
                       initial_state="stationary-warmup"),
        )
        fit = fit_mle(path, cfg, fam)
        if not fit.boundary:
            errors.append(fit.theta_hat[0] - theta0)
    errors = np.array(errors)
    z = np.sqrt(k) * errors * np.sqrt(sigma)          # unit variance in the limit
    stat, reject = jarque_bera(z)
    print(f"{k:7d}  {np.median(np.abs(errors)):11.5f}  {z.std(ddof=1):17.3f}  "
          f"{'yes' if reject else 'no'} (JB {stat:.1f})")

print("\nThe median error shrinks with k and the standardized spread approaches 1;")
print("at small k the error law is visibly right-skewed, which the moments test flags.")
