"""Bootstrap Markov-chain Monte Carlo fitting of Gaussian rating-scale models.

The package has three layers. The bottom layer is a generic annealed
Metropolis engine whose proposals are differences of archived states
(``chain``, ``drivers``, ``problem``). The middle layer states the rating
models: equal-variance and unequal-variance signal detection with fixed or
Gaussian-distributed criteria (``models``, ``quadrature``, ``_kernels``).
The top layer simulates rating matrices, fits them by maximum likelihood,
and reports goodness of fit and confidence limits (``simulate``, ``gof``,
``fitting``, ``io``, ``cli``).
"""

from bmcmc.quadrature import GaussianSpec, QuadratureError, phi, Phi, romberg, truncate_infinite
from bmcmc.problem import ProblemDefinition, evaluate, reflect_fix
from bmcmc.chain import (
    AnnealState,
    Archive,
    ChainState,
    ParameterPoint,
    StepScale,
    anneal_step,
    metropolis_accept,
    maybe_reset,
    propose_bootstrap,
    propose_prespecified,
    record_acceptance,
    select_generator,
)
from bmcmc.drivers import (
    ChainConfig,
    DriftTracker,
    ErgodicityBudget,
    confidence_limits,
    detect_drift,
    run_optimisation,
    run_sampling,
)
from bmcmc.models import (
    CJParameters,
    ModelVariant,
    fix_parameters,
    log_likelihood,
    response_probabilities,
)
from bmcmc.simulate import RatingMatrix, simulate_matrix
from bmcmc.gof import (
    GofReport,
    classify_fit,
    consistency,
    coverage_check,
    gof,
    rescale_generating,
)
from bmcmc.fitting import FitResult, fit_model
from bmcmc.io import FitConfig, read_counts, read_parameters, write_counts, write_parameters

__all__ = [
    "GaussianSpec",
    "QuadratureError",
    "phi",
    "Phi",
    "romberg",
    "truncate_infinite",
    "ProblemDefinition",
    "evaluate",
    "reflect_fix",
    "AnnealState",
    "Archive",
    "ChainState",
    "ParameterPoint",
    "StepScale",
    "anneal_step",
    "metropolis_accept",
    "maybe_reset",
    "propose_bootstrap",
    "propose_prespecified",
    "record_acceptance",
    "select_generator",
    "ChainConfig",
    "DriftTracker",
    "ErgodicityBudget",
    "confidence_limits",
    "detect_drift",
    "run_optimisation",
    "run_sampling",
    "CJParameters",
    "ModelVariant",
    "fix_parameters",
    "log_likelihood",
    "response_probabilities",
    "RatingMatrix",
    "simulate_matrix",
    "GofReport",
    "classify_fit",
    "consistency",
    "coverage_check",
    "gof",
    "rescale_generating",
    "FitResult",
    "fit_model",
    "FitConfig",
    "read_counts",
    "read_parameters",
    "write_counts",
    "write_parameters",
]
