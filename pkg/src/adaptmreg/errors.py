"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs or configuration fail a precondition."""


class CalibrationError(RuntimeError):
    """Raised when a critical-value search cannot meet its error budget."""
