"""Exception types shared across the package."""


class DegenerateGeometryError(ValueError):
    """Raised when positions coincide or a scatterer sits on an antenna element."""


class InsufficientDataError(ValueError):
    """Raised when a dataset is too small for the requested operation."""


class NumericError(RuntimeError):
    """Raised when a computation produces non-finite values."""
