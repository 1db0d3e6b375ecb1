"""Exception types shared across the package."""


class WetSimError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WetSimError, ValueError):
    """A configuration value is outside its allowed range."""


class DimensionError(WetSimError, ValueError):
    """Two inputs that must share a dimension do not."""


class DegenerateEstimateError(WetSimError, ArithmeticError):
    """Phase estimator received readings with no usable sinusoidal component."""
