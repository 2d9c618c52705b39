"""Exception hierarchy shared by every module."""


class FoursplitError(Exception):
    """Base class for package errors."""


class DimensionError(FoursplitError, ValueError):
    """Operand shapes do not conform."""


class DomainError(FoursplitError, ValueError):
    """A point lies outside the domain of an operator or function."""


class ConfigError(FoursplitError, ValueError):
    """Solver parameters violate their admissibility constraints."""


class ProblemError(FoursplitError, ValueError):
    """Problem data is inconsistent or infeasible."""


class LineSearchError(FoursplitError, RuntimeError):
    """Backtracking exhausted its cap without accepting a step.

    Attributes
    ----------
    iteration : int or None
        Outer iteration at which the search failed.
    gamma : float
        Last trial step.
    backtracks : int
        Number of reductions performed.
    lhs, rhs : float
        Both sides of the acceptance test at the last trial.
    """

    def __init__(self, message, *, iteration=None, gamma=float("nan"),
                 backtracks=0, lhs=float("nan"), rhs=float("nan")):
        super().__init__(message)
        self.iteration = iteration
        self.gamma = gamma
        self.backtracks = backtracks
        self.lhs = lhs
        self.rhs = rhs
