"""Exception hierarchy shared by every module of the package."""


class SparseGevError(Exception):
    """Base class for all package errors."""


class DomainError(SparseGevError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DimensionError(SparseGevError, ValueError):
    """Array shapes do not agree."""


class DegenerateDataError(SparseGevError, ValueError):
    """Data carry no usable variation (constant series, identical samples)."""


class ConvergenceError(SparseGevError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate and a residual diagnostic are kept on the exception so
    callers can decide whether the approximate answer is still usable.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class ParticleDegeneracyError(SparseGevError, RuntimeError):
    """All importance weights collapsed to zero at some time step."""

    def __init__(self, message, t=None, diagnostics=None):
        super().__init__(message)
        self.t = t
        self.diagnostics = diagnostics or {}


class ParseError(SparseGevError, ValueError):
    """Malformed input file; message carries row/column location."""
