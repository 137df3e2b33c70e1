"""Estimation of service-value distributions from balking-censored queue data,
with closed-form stationary pricing analysis and an adaptive pricing loop."""

from .model import (
    ExponentialFamily,
    ModelConfig,
    ParamSpace,
    ValueFamily,
    is_informative,
    joining_rate,
    offered_reward,
    up_prob_grad,
    up_prob_hess,
    up_probability,
)
from .simulator import (
    AbsorbingStateError,
    PathStats,
    QueuePath,
    SimOptions,
    concat_paths,
    path_stats,
    simulate_full_arrivals,
    simulate_path,
)
from .inference import (
    FitResult,
    confidence_interval,
    fit_mle,
    log_likelihood,
    observed_information,
    score,
    score_outer_product,
    transition_counts,
)
from .stationary import (
    StationaryDist,
    TruncationError,
    asymptotic_std,
    expected_revenue,
    min_std_price,
    optimal_price,
    price_upper_bound,
    revenue_curve,
    stationary_distribution,
    stationary_weights,
    std_curve,
    theoretical_sigma,
)
from .pricing import (
    IterationRecord,
    ObservationSource,
    PricingConfig,
    PricingTrace,
    SimulatedSource,
    TraceMetrics,
    pooled_theta,
    revenue_gap,
    run_pricing,
    trace_metrics,
)
from .experiments import ExperimentConfig, jarque_bera, run_experiment

__version__ = "0.1.0"
