class QSpectralError(Exception):
    """Base class of all errors raised by qspectral."""


class GridRangeError(QSpectralError, ValueError):
    """A label or index lies outside the axis range of a grid."""


class NotAGridPointError(QSpectralError, ValueError):
    """A value is not exactly one of the grid values."""


class ParameterError(QSpectralError, ValueError):
    """Parameters violate the validity conditions of an operation."""


class PreconditionError(QSpectralError, ValueError):
    """An inequality check was called outside the range in which it is stated."""


class DivergenceError(QSpectralError, ArithmeticError):
    """A geometric series used as an error bound does not converge."""


class ResourceLimitError(QSpectralError, MemoryError):
    """The simulated state would exceed the configured amplitude cap."""

    def __init__(self, requested, cap, suggestion=''):
        self.requested = requested
        self.cap = cap
        msg = f'state needs {requested} amplitudes, cap is {cap}'
        if suggestion:
            msg += f'; {suggestion}'
        super().__init__(msg)


class RealityViolationError(QSpectralError, ArithmeticError):
    """A derivative form that must be real has a large imaginary part."""


class RecoveryError(QSpectralError):
    """Row recovery over Z_q failed for a specific row."""

    def __init__(self, row, msg):
        self.row = row
        super().__init__(f'row {row}: {msg}')


class AmbiguousRecoveryError(RecoveryError):
    pass


class InconsistentResiduesError(RecoveryError):
    pass


class ConfigError(QSpectralError, ValueError):
    """Invalid run configuration."""
