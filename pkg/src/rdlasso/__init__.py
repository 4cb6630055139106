"""Sharp regression-discontinuity estimation with adaptive-lasso covariate
selection, bias-corrected robust inference, and a deterministic Monte Carlo
engine for coverage and bias studies."""

__version__ = "0.1.0"

from .errors import (
    AllRepsFailed,
    AllUnpenalized,
    ConfigInvalid,
    DataFormatError,
    DegenerateBias,
    DegenerateDof,
    DegeneratePilot,
    DimensionMismatch,
    InsufficientSupport,
    InvalidGamma,
    InvalidSpec,
    NotPsd,
    PilotRankDeficient,
    RankDeficient,
    RdlassoError,
    TooFewObservations,
)
from .kernels import KERNELS, kernel_weight, kernel_weights, plugin_constant
from .linreg import (
    DesignMatrix,
    WlsFit,
    classical_standard_errors,
    design,
    hc_standard_errors,
    wls_fit,
)
from .penalized import (
    ADAPTIVE_LASSO,
    LASSO,
    RIDGE,
    CvRecord,
    PenalizedFit,
    PenaltySpec,
    adaptive_weights,
    cv_select_gamma,
    cv_select_lambda,
    default_fold_count,
    fit_penalized,
    lambda_max,
    soft_threshold,
)
from .pipeline import (
    FULL_SAMPLE,
    IK_NO_COVARIATES,
    PipelineConfig,
    PipelineResult,
    run_conventional,
    run_pipeline,
)
from .rdd import (
    BandwidthResult,
    RddDataset,
    RddEstimate,
    check_positivity,
    fixed_bandwidth,
    ik_bandwidth,
    llr_estimate,
    nn_variance,
    robust_bias_corrected,
)
from .sim import (
    DgpSpec,
    McConfig,
    SimulationSummary,
    default_dgp,
    generate_dataset,
    mvn_sample,
    replication_seed,
    run_monte_carlo,
    summary_rows,
    sweep_sample_size,
)

__all__ = [name for name in dir() if not name.startswith("_")]
