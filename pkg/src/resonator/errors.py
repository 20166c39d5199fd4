"""Exception and warning classes shared across the package."""


class ResonatorError(Exception):
    """Base class for all package errors."""


class InvalidSpec(ResonatorError, ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class EmptyGrid(ResonatorError):
    pass


class DimensionMismatch(ResonatorError, ValueError):
    pass


class GridMismatch(ResonatorError, ValueError):
    pass


class BranchViolation(ResonatorError, ValueError):
    pass


class ZeroVector(ResonatorError, ValueError):
    pass


class NonpositiveLambda0(ResonatorError, ValueError):
    pass


class SolverFailure(ResonatorError):
    pass


class NoConvergence(ResonatorError):
    """Iteration budget exhausted; ``best`` carries the last iterate if any."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class LostTrack(ResonatorError):
    def __init__(self, message, overlap):
        super().__init__(message)
        self.overlap = overlap


class RootNotFound(ResonatorError):
    pass


class TooLarge(ResonatorError, ValueError):
    pass


class SingularNormalMatrix(ResonatorError):
    def __init__(self, message, condition):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class UnderdeterminedProblem(SingularNormalMatrix):
    """Fewer measurements than unknowns: the normal matrix is singular by count."""


class ConfigError(ResonatorError, ValueError):
    pass


class DegenerateEigenvalueWarning(UserWarning):
    """The selected eigenvalue of T0 is not numerically simple."""


class NoConvergenceWarning(UserWarning):
    pass
