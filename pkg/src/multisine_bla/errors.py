"""Exception types raised across the package."""


class MultisineBlaError(Exception):
    """Base class for all package errors."""


class DesignError(MultisineBlaError, ValueError):
    """Invalid excitation design (band, rates, realization index)."""


class RecordError(MultisineBlaError, ValueError):
    """Measured or simulated data failed validation."""


class NumericalError(MultisineBlaError, ArithmeticError):
    """An estimator could not produce a well-defined result."""


class PlantError(MultisineBlaError, ValueError):
    """Invalid synthetic plant description."""
