"""Exception types shared by all modules.

Every error derives from ``BlockEncError`` (itself a ``ValueError``) so
callers can catch the whole family or one specific failure.
"""


class BlockEncError(ValueError):
    """Base class for all package errors."""


class ShapeError(BlockEncError):
    """Operand shapes are incompatible or non-square where square is needed."""


class SymmetryError(BlockEncError):
    """A matrix that must be Hermitian is not, beyond tolerance."""


class SingularityError(BlockEncError):
    """A matrix that must be invertible is (numerically) singular."""


class ValidationError(BlockEncError):
    """An input violates a documented precondition."""


class DomainError(BlockEncError):
    """A scalar parameter lies outside its allowed range."""


class AmplificationDomainError(DomainError):
    """Singular values are too large for the requested amplification."""


class SpectrumError(DomainError):
    """A spectrum lies outside the interval a matrix power transform needs."""


class ParityError(BlockEncError):
    """A polynomial transform was requested on a non-Hermitian encoding."""


class ZeroProbabilityError(BlockEncError):
    """Post-selection would succeed with (numerically) zero probability."""


class DegenerateStartError(BlockEncError):
    """A random start vector has no overlap with the dominant eigenvector."""


class GapTooSmallError(BlockEncError):
    """The spectral gap between requested components is too small."""


class ApproximationError(BlockEncError):
    """A polynomial approximant could not reach the requested accuracy."""


class ConfigError(BlockEncError):
    """An experiment configuration is invalid."""
