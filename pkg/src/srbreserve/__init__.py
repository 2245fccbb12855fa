"""Claims reserving with stable-1/2 random bridges.

The paid-claims process is a stable-1/2 subordinator conditioned to end at a
random ultimate loss with a chosen prior. Given paid-claims observations the
package computes the conditional law of the ultimate loss, best-estimate
reserves, stop-loss layer recoveries and tail diagnostics, simulates
paid-claims paths and handles a pair of dependent lines.
"""
from types import ModuleType as _ModuleType

from .bridge import (
    bridge_cdf,
    bridge_conditional_mean,
    bridge_conditional_raw_second_moment,
    bridge_conditional_second_moment,
    bridge_density,
    bridge_incomplete_first_moment,
    bridge_sf,
    bridge_upper_first_moment,
)
from .gigclosed import closed_best_estimate, closed_exponential_moment, closed_higher_moment, mixture_weights
from .lrb import ConditionalLaw, Observation, PosteriorSampler, reanchor, transition_density
from .multiline import (
    JointObservation,
    MultiLineConfig,
    a_priori_correlation,
    best_estimates,
    correlation_components,
    line_reports,
)
from .prior import (
    ExponentialPrior,
    GIGPrior,
    GPDPrior,
    HalfNormalPrior,
    LevyStablePrior,
    PriorLaw,
    TabulatedPrior,
    integrate_against,
    prior_from_config,
)
from .quadrature import QuadratureError
from .reserve import (
    InfiniteMomentError,
    LayerSpec,
    ReservingReport,
    best_estimate,
    conditional_value_at_risk,
    conditional_variance,
    expected_exceedance,
    layer_recovery_schedule,
    paid_claims_conditional_mean,
    reserving_report,
    tail_ratio,
    tail_ratio_limit,
)
from .sim import PathEnsemble, sample_paid_at_dates, simulate_conditional, simulate_paths
from .stable import BridgeParams, laplace_transform, subordinator_cdf, subordinator_density
from .timechange import (
    TimeChangedModel,
    WeibullExposure,
    curve_from_config,
    exposure_peak,
    operational_time,
    timechanged_view,
)

__version__ = "0.1.0"

__all__ = [n for n, v in dict(globals()).items() if not n.startswith("_") and not isinstance(v, _ModuleType)]
