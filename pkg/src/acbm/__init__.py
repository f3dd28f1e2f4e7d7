"""Averaged constrained Binomial mixture (ACBM) item-response model:
collapsed Gibbs inference over question clusters and per-cluster examinee
mixtures, posterior summaries, simulation benchmarks and a Rasch baseline.
"""

from .backend import DEFAULT_BACKEND, HAVE_COMPILED, available_backends
from .core import (
    ChainTrace,
    ColumnPartition,
    FitSummary,
    Hyperparams,
    ModelState,
    ResponseMatrix,
    RowPartition,
    kmax_bound,
    read_matrix_csv,
    recompute_suffstats,
    validate_matrix,
    write_matrix_csv,
)
from .priors import (
    build_mfm_coefficients,
    log_beta_binomial_marginal,
    log_partition_prior,
    log_predictive,
)
from .dgp import (
    AcbmDesign,
    RaschDesign,
    dgp1_design,
    dgp2_design,
    dgp3_design,
    dgp4_design,
    generate_acbm,
    generate_rasch,
)
from .metrics import GroundTruth, adk, adp, adw, arwri, cwri, d1, rand_index
from .rasch import RaschFit, fit_rasch, rasch_accuracy_matrix
from .sampler import SamplerConfig, log_joint, run_chain
from .summarize import (
    CoclusteringMatrix,
    dahl_column_estimate,
    dahl_row_estimate,
    posterior_accuracy,
    summarize_trace,
)

__version__ = "0.1.0"

__all__ = [
    "AcbmDesign",
    "ChainTrace",
    "CoclusteringMatrix",
    "GroundTruth",
    "RaschDesign",
    "RaschFit",
    "adk",
    "adp",
    "adw",
    "arwri",
    "cwri",
    "d1",
    "dahl_column_estimate",
    "dahl_row_estimate",
    "dgp1_design",
    "dgp2_design",
    "dgp3_design",
    "dgp4_design",
    "fit_rasch",
    "generate_acbm",
    "generate_rasch",
    "posterior_accuracy",
    "rand_index",
    "rasch_accuracy_matrix",
    "summarize_trace",
    "ColumnPartition",
    "FitSummary",
    "Hyperparams",
    "ModelState",
    "ResponseMatrix",
    "RowPartition",
    "SamplerConfig",
    "DEFAULT_BACKEND",
    "HAVE_COMPILED",
    "available_backends",
    "build_mfm_coefficients",
    "kmax_bound",
    "log_beta_binomial_marginal",
    "log_joint",
    "log_partition_prior",
    "log_predictive",
    "read_matrix_csv",
    "recompute_suffstats",
    "run_chain",
    "validate_matrix",
    "write_matrix_csv",
]
