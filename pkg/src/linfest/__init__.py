"""Estimation of sparse and mixture-Gaussian signals under the ℓ∞ error metric."""

from .errors import (
    ConfigError,
    CsvParseError,
    DegeneratePosteriorError,
    DivergenceError,
    DomainError,
    LinfError,
    NumericError,
    ParameterError,
)
from .estimators import (
    EstimatorSpec,
    error_report,
    lp_norm,
    lp_scalar_estimate,
    lp_vector_estimate,
    posterior_mean_estimate,
    wiener_mixture,
    wiener_sparse,
)
from .evt import berman_ratio, sigma_pattern, support_dominance
from .gamp import GampConfig, GampResult, gamp_run
from .kernels import BACKEND
from .posterior import (
    EffectiveChannel,
    GridPolicy,
    ScalarPosterior,
    posterior_gaussian_mixture,
    posterior_grid,
    posterior_moments,
)
from .signal_model import (
    ChannelSpec,
    PriorSpec,
    linear_mixing_instance,
    sample_matrix,
    sample_signal,
    snr_to_noise_variance,
)

__version__ = "0.1.0"
