"""Four-operator splitting with line search for monotone inclusions."""

from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    FoursplitError,
    LineSearchError,
    ProblemError,
)
from .linalg import ProductPoint, operator_norm
from .nlconstr import NlcProblem, alg1_defaults, build_bundle, kkt_report
from .splitting import OperatorBundle, SolverConfig, solve

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DimensionError", "DomainError", "FoursplitError", "LineSearchError",
    "ProblemError", "ProductPoint", "operator_norm", "NlcProblem", "alg1_defaults",
    "build_bundle", "kkt_report", "OperatorBundle", "SolverConfig", "solve",
]
