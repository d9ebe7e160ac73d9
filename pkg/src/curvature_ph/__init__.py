"""curvature-ph - Quadratic-form criterion for partial hyperbolicity of geodesic flows."""

from .models import (
    CurvatureModel,
    SplitSpec,
    EigenSplit,
    RootDatum,
    DirectionPath,
    HigherRankFamily,
    BumpSpec,
    constant_curvature_model,
    rank_one_symmetric_model,
    higher_rank_model,
    conformal_perturbation,
    orthogonal_frame,
    non_anosov_scenario,
    eigen_split,
    full_split,
)
from .dynamics import (
    TangentPair,
    PropagatorMatrix,
    jacobi_rhs,
    closed_form_block,
    closed_form_propagator,
    propagate_rk4,
    propagate_span,
    transition_matrix,
    wronskian,
)
from .criterion import (
    QFormParams,
    ConeClass,
    ConeSample,
    CriterionReport,
    GapReport,
    EpsilonReport,
    qform_eval,
    assemble_S,
    form_derivative,
    fd_derivative_oracle,
    negative_curvature_check,
    cone_sample,
    criterion_check,
    aligned_family_minimum,
    gap_functions,
    corollary_margin,
    corollary_epsilon,
    reference_beta,
)
from .estimator import (
    LyapunovReport,
    SplittingDims,
    ConeInvarianceReport,
    BadSetReport,
    lyapunov_spectrum,
    splitting_dims,
    cone_invariance_test,
    time_in_bad_set,
    expected_bad_fraction,
)
from .config import ExperimentConfig, ModelSpec, parse_config, load_config, serialize_config
from .runner import Logger, run_experiment, emit_csv, main
from .progress import SimpleProgress, detect_environment, get_progress_handler
from .validate import (
    ParameterError,
    ContractViolation,
    PreconditionError,
    ConfigError,
    NumericError,
    IntegrationOverflowError,
)

__version__ = "1.0.0"
__all__ = [
    "CurvatureModel",
    "SplitSpec",
    "EigenSplit",
    "RootDatum",
    "DirectionPath",
    "HigherRankFamily",
    "BumpSpec",
    "constant_curvature_model",
    "rank_one_symmetric_model",
    "higher_rank_model",
    "conformal_perturbation",
    "orthogonal_frame",
    "non_anosov_scenario",
    "eigen_split",
    "full_split",
    "TangentPair",
    "PropagatorMatrix",
    "jacobi_rhs",
    "closed_form_block",
    "closed_form_propagator",
    "propagate_rk4",
    "propagate_span",
    "transition_matrix",
    "wronskian",
    "QFormParams",
    "ConeClass",
    "ConeSample",
    "CriterionReport",
    "GapReport",
    "EpsilonReport",
    "qform_eval",
    "assemble_S",
    "form_derivative",
    "fd_derivative_oracle",
    "negative_curvature_check",
    "cone_sample",
    "criterion_check",
    "aligned_family_minimum",
    "gap_functions",
    "corollary_margin",
    "corollary_epsilon",
    "reference_beta",
    "LyapunovReport",
    "SplittingDims",
    "ConeInvarianceReport",
    "BadSetReport",
    "lyapunov_spectrum",
    "splitting_dims",
    "cone_invariance_test",
    "time_in_bad_set",
    "expected_bad_fraction",
    "ExperimentConfig",
    "ModelSpec",
    "parse_config",
    "load_config",
    "serialize_config",
    "Logger",
    "run_experiment",
    "emit_csv",
    "main",
    "SimpleProgress",
    "detect_environment",
    "get_progress_handler",
    "ParameterError",
    "ContractViolation",
    "PreconditionError",
    "ConfigError",
    "NumericError",
    "IntegrationOverflowError",
]
