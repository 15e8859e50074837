"""Exception hierarchy shared by all modules."""


class CrossDiffError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(CrossDiffError, ValueError):
    pass


class DimensionMismatch(CrossDiffError, ValueError):
    pass


class NotSymmetric(CrossDiffError, ValueError):
    pass


class NotPositiveDefinite(CrossDiffError, ValueError):
    pass


class EvaluationFailure(CrossDiffError, ValueError):
    pass


class LinearSolveFailure(CrossDiffError, RuntimeError):
    pass


class NewtonDivergence(CrossDiffError, RuntimeError):
    """Newton iteration gave up.

    Carries the best iterate seen (smallest max-norm residual) so callers can
    inspect where the solve stalled.
    """

    def __init__(self, message, best_iterate=None, residual_norm=float("nan"), iterations=0):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.residual_norm = residual_norm
        self.iterations = iterations


class RunFailure(CrossDiffError, RuntimeError):
    """A time step failed; ``trajectory`` holds everything computed before it."""

    def __init__(self, message, trajectory=None, cause=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.cause = cause


class DegenerateFit(CrossDiffError, ValueError):
    pass


class MisalignedHorizon(CrossDiffError, ValueError):
    pass


class SnapshotMissing(CrossDiffError, KeyError):
    pass


class ParseError(CrossDiffError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column


class ValidationError(CrossDiffError, ValueError):
    def __init__(self, field, message=None):
        super().__init__(f"{field}: {message}" if message else f"{field}")
        self.field = field
