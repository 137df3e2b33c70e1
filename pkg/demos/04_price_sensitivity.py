"""How the admission price trades revenue against learning speed.

Two curves drive everything: stationary revenue per unit time, which peaks at
a moderate price, and the asymptotic standard deviation of the estimator,
which is minimized at a much higher price (longer queues are rarer but each
informative transition says more).  Learning fastest and earning most are
different prices.
"""

import numpy as np

from balkwise import (
    ExponentialFamily,
    ModelConfig,
    ParamSpace,
    expected_revenue,
    min_std_price,
    optimal_price,
    revenue_curve,
    std_curve,
)

cfg = ModelConfig(lam=1.0, mu=1.0, cost_c=1.0, price=15.0)
fam = ExponentialFamily(ParamSpace([1e-3], [5.0]))

for theta in (0.02, 0.08):
    p_rev = optimal_price([theta], cfg, fam)
    p_std = min_std_price([theta], cfg, fam)
    print(f"theta = {theta}: revenue peaks at price {p_rev:6.2f} "
          f"(rate {expected_revenue(p_rev, [theta], cfg, fam):6.3f}); "
          f"estimation error is smallest at price {p_std:6.2f}")

theta = [0.02]
prices = np.linspace(5, 250, 12)
rev = revenue_curve(prices, theta, cfg, fam)
std = std_curve(prices, theta, cfg, fam)
print(f"\n{'price':>7} {'revenue rate':>13} {'asymptotic std':>15}")
for p, r, s in zip(prices, rev, std):
    print(f"{p:7.1f} {r:13.4f} {s:15.4f}")

print("\nBoth curves are gentler to the right of their optimum than to the left:")
print("overpricing costs less than underpricing, for revenue and for learning alike.")
