"""Switched least squares identification of stochastic switched linear systems."""
import jax

# identification accuracy checks need double precision
jax.config.update("jax_enable_x64", True)

from swsysid.analysis import (  # noqa: E402
    appendix_diagnostics,
    average_energy,
    bounds_report,
    data_dependent_bound,
    data_independent_bounds,
    error_inf,
    rate_exponent_fit,
)
from swsysid.estimators import (  # noqa: E402
    EstimatorState,
    batch_fit,
    covariance_extremes,
    recursive_fit,
    recursive_step,
)
from swsysid.experiment import ExperimentConfig, run_experiment, stability_report  # noqa: E402
from swsysid.models import (  # noqa: E402
    SwitchedSystem,
    Trajectory,
    assumption2_margin,
    mss_radius,
    replay,
    simulate,
    transition_product,
)
from swsysid.noise import NoiseModel, sample_noise  # noqa: E402
from swsysid.utils import emit_artifacts  # noqa: E402

__version__ = "0.1.0"
