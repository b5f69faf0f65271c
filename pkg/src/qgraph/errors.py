"""Exception hierarchy shared by the library and the CLI."""


class QGraphError(Exception):
    """Base class for all errors raised by :mod:`qgraph`."""


class StructureError(QGraphError):
    """Malformed graph input: non-unitary coupling, index collisions, bad shapes."""


class ParameterError(QGraphError):
    """Invalid family parameters or an unusable (A, B) parametrization."""


class ConfigError(QGraphError):
    """Invalid run configuration (unknown keys, empty ranges, ...)."""


class NumericError(QGraphError):
    """A numerical procedure failed to deliver a trustworthy answer."""


class PoleProximityError(NumericError):
    """Evaluation requested too close to a pole of the lead factor."""


class RangeError(NumericError):
    """Momentum too far from the real axis for finite trigonometric values."""


class ConvergenceError(NumericError):
    """Newton refinement did not converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])


class BoundaryZeroError(NumericError):
    """Argument-principle winding number is not close to an integer."""


class TrajectoryBreakError(NumericError):
    """Continuation step size underflowed; ``last`` holds the last good point."""

    def __init__(self, message, last=None, samples=None):
        super().__init__(message)
        self.last = last
        self.samples = list(samples or [])
