"""Survival probabilities and credit spreads for a partially observed firm.

The firm value is a hidden diffusion observed only through a noisy price
process.  The package quantizes the hidden value on per-time-step optimal
grids, runs a discrete forward filter on the observed prices, estimates
barrier-survival probabilities with bridge-corrected Monte Carlo, and
turns them into zero-coupon credit-spread curves.
"""

__version__ = "0.1.0"

from .config import ConfigError, ConfigParseError, ScenarioConfig, load_config, parse_config
from .dynamics import (
    CEV,
    GBM,
    MarketScenario,
    ObservationModel,
    PathSample,
    StepFunction,
    TimeGrid,
    coefficients,
    correlation_bs,
    simulate_joint_path,
    simulate_joint_paths,
    simulate_value_paths,
    survival_gbm_closed,
)
from .filtering import (
    FilterDistribution,
    FilterUnderflowError,
    ObservationPath,
    bayes_update,
    filter_init,
    filter_step,
    likelihood,
    likelihood_matrix,
    run_filter,
)
from .pipeline import ObservationMisalignedError, run_convergence, run_pipeline
from .quantization import (
    GridSequence,
    QuantizerGrid,
    TransitionMatrix,
    build_grid_sequence,
    estimate_transitions,
    grid_distortion,
    lloyd_pass,
    nearest_projection,
    quantile_grid,
)
from .spreads import SpreadCurve, SpreadPoint, spread, spread_curve
from .survival import (
    BridgeInterval,
    SurvivalEstimate,
    bridge_survival_factor,
    survival_full_mc,
    survival_naive_mc,
    survival_partial,
)

__all__ = [name for name in dir() if not name.startswith("_")]
