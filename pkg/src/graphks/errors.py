"""Exception types shared across the package."""


class GraphKSError(Exception):
    """Base class for all graphks errors."""


class ParseError(GraphKSError):
    """Malformed graph spec or run config."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class DisconnectedGraph(GraphKSError):
    pass


class NonpositiveLength(GraphKSError):
    pass


class UnknownEdge(GraphKSError):
    pass


class PathBudgetExceeded(GraphKSError):
    """Path enumeration hit the hard cap; the cutoff is too large for this graph."""


class NonpositiveTime(GraphKSError):
    pass


class TimeOutOfRange(GraphKSError):
    pass


class MeshMismatch(GraphKSError):
    pass


class MeshTooCoarse(GraphKSError):
    pass


class ConvergenceFailure(GraphKSError):
    pass


class SolveFailure(GraphKSError):
    pass


class StepUnstable(GraphKSError):
    """CFL-type guard tripped on the explicit advective term."""


class QuadratureUnderResolved(GraphKSError):
    pass


class BoundViolated(GraphKSError):
    def __init__(self, message, worst_time=None, margin=None):
        super().__init__(message)
        self.worst_time = worst_time
        self.margin = margin
