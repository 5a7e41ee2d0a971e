"""Exception hierarchy shared by the library and the command line."""


class MadoaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(MadoaError, ValueError):
    """An input array or scalar has the wrong shape, type or value."""


class ConfigError(MadoaError, ValueError):
    """A configuration value is missing, unknown or out of range."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class NumericalFailureError(MadoaError, ArithmeticError):
    """A linear solve or eigendecomposition failed or produced non-finite values."""


class UnsupportedConfigurationError(MadoaError, ValueError):
    """The requested configuration is outside what the estimator handles (e.g. K = 1)."""


class DegenerateGeometryError(MadoaError, ValueError):
    """The direction matrix used for position recovery is rank deficient."""
