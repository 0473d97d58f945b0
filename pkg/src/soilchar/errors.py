"""Exception types shared across soilchar.

Every error raised on purpose by the package derives from ``SoilcharError``
so callers (the CLI in particular) can map failures to exit codes without
catching unrelated exceptions.
"""


class SoilcharError(Exception):
    pass


class DomainError(SoilcharError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class ParseError(SoilcharError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class InsufficientDataError(SoilcharError, ValueError):
    pass


class CalibrationRangeError(SoilcharError, ValueError):
    """Base class for inversions that fall outside the calibrated salinity span."""


class AboveCalibrationError(CalibrationRangeError):
    pass


class BelowCalibrationError(CalibrationRangeError):
    pass


class NoModelError(SoilcharError, LookupError):
    pass


class UndefinedStatisticError(SoilcharError, ValueError):
    pass


class ConfigurationError(SoilcharError, ValueError):
    pass


class ValidationError(SoilcharError, ValueError):
    pass


class NumericError(SoilcharError, ArithmeticError):
    pass


class AuthorizationError(SoilcharError, PermissionError):
    pass


class NotFoundError(SoilcharError, LookupError):
    pass


class OutOfCalibrationWarning(UserWarning):
    """Inverted salinity is above 100 % but still within the tolerated margin."""
