"""Exception and warning types.

Every error carries an ``exit_code`` so the CLI can map failures onto its
exit-code contract without a lookup table.
"""


class LdhitError(Exception):
    exit_code = 1


class ConfigError(LdhitError, ValueError):
    exit_code = 2


class SolverError(LdhitError, ArithmeticError):
    exit_code = 3


class RegimeError(LdhitError):
    exit_code = 4


class FitError(LdhitError):
    exit_code = 5


# jump models
class DomainError(SolverError):
    """Argument lies outside the domain where the MGF is finite."""


class UnsupportedTilt(LdhitError, NotImplementedError):
    exit_code = 2


# rate functions
class NotInCramerRange(SolverError):
    pass


class SingularHessian(SolverError):
    pass


class NoInteriorMinimum(SolverError):
    pass


class DualSolveFailed(SolverError):
    pass


# geometry
class ConstrainedSolveFailed(SolverError):
    pass


class SingularFrame(SolverError):
    pass


class C3Violated(RegimeError):
    pass


class NoLargeDeviationRegime(RegimeError):
    pass


# asymptotics
class NonPositiveCurvature(SolverError):
    pass


class TruncationBudgetExceeded(SolverError):
    pass


class DegenerateFit(FitError):
    pass


# simulation
class InvalidTilt(ConfigError):
    pass


class C3Marginal(UserWarning):
    """A condition inequality holds only within the numerical margin."""


class BudgetWarning(UserWarning):
    """Some trajectories did not reach the target within the step budget."""
