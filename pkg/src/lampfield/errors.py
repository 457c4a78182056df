"""Exception types shared across the package."""


class LampfieldError(Exception):
    """Base class for package errors."""


class DomainError(LampfieldError, ValueError):
    """An argument lies outside the domain of a map (e.g. a non-positive time)."""


class ParameterError(LampfieldError, ValueError):
    """A model parameter is out of its admissible range."""


class NumericError(LampfieldError, ArithmeticError):
    """A numerical procedure failed (non-PSD Gram matrix, singular matrix, ...)."""


class GridRangeError(LampfieldError, IndexError):
    """A requested index or image point is not covered by the sampled grid."""
