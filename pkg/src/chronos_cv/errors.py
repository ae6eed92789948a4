"""Exception types shared across the package."""


class ChronosError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(ChronosError, ValueError):
    pass


class InvalidStateError(ChronosError, ValueError):
    pass


class DimensionMismatchError(ChronosError, ValueError):
    pass


class SingularCovarianceError(ChronosError, ArithmeticError):
    """Raised when a covariance matrix has a null direction and no regularization was given.

    The offending unit vector is stored on ``null_direction``.
    """

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class ScheduleError(ChronosError, ValueError):
    pass


class UnsupportedStateError(ChronosError, ValueError):
    pass


class NotTracePreservingError(ChronosError, ValueError):
    pass


class NumericalGuardError(ChronosError, RuntimeError):
    """A numerical precondition failed and the computation was refused."""


class GridOverflowError(NumericalGuardError):
    """A wavepacket reached the edge of the position grid."""


class BoundaryDecayError(NumericalGuardError):
    """The sampled field has not decayed at the edge of the phase-space grid."""


class SampleSizeError(ChronosError, ValueError):
    pass
