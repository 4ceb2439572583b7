"""Exception types shared across the package."""


class GmrfGeodesicsError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(GmrfGeodesicsError, ValueError):
    """A model or configuration parameter is outside its valid domain."""


class InvalidDimensionError(GmrfGeodesicsError, ValueError):
    """A lattice or array dimension is too small or inconsistent."""


class SingularMetricError(GmrfGeodesicsError, ArithmeticError):
    """The (regularized) metric tensor cannot be inverted."""


class NonFiniteStateError(GmrfGeodesicsError, ArithmeticError):
    """An integration step produced NaN or infinite state components."""


class BatchFormatError(GmrfGeodesicsError, ValueError):
    """An experiment batch file is malformed or uses an unsupported version."""
