"""Exception hierarchy shared across the package."""


class TlnMemoryError(Exception):
    """Base class for all package errors."""


class ParameterError(TlnMemoryError, ValueError):
    """A network or configuration parameter violates its admissible range."""


class DimensionError(TlnMemoryError, ValueError):
    """Array shapes do not agree."""


class IndexRangeError(TlnMemoryError, IndexError):
    """A 1-based chain index is out of range."""


class DegenerateNetworkError(TlnMemoryError):
    """A restricted system I - W_ss is singular."""


class DivergenceError(TlnMemoryError):
    """Numerical integration produced a non-finite state."""

    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class CapacityError(TlnMemoryError):
    """No free latent attractor is left for a new pattern."""


class TransitionError(TlnMemoryError):
    """The learning controller failed to move the state to the next attractor."""


class NotEquilibriumError(TlnMemoryError):
    """A state that should be an equilibrium has a nonzero vector field."""


class DegenerateEncoderError(TlnMemoryError):
    """The encoder does not act on the latent coordinates being certified."""


class SolverError(TlnMemoryError):
    """Numerical breakdown inside an optimization or factorization routine."""


class NotStabilizableError(TlnMemoryError):
    """The (A, B) pair has no stabilizing Riccati solution."""


class DataFormatError(TlnMemoryError):
    """Base class for malformed data files."""


class BadMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    def __init__(self, message, offset):
        super().__init__(message)
        self.offset = offset


class CountMismatchError(DataFormatError):
    pass


class UnsupportedVersionError(DataFormatError):
    pass


class ChecksumError(DataFormatError):
    pass


class NoCertificateError(TlnMemoryError):
    """The certification problem is infeasible for every tried parameter value."""
