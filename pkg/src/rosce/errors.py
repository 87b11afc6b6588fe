"""Exception types raised across the package."""


class RosceError(Exception):
    """Base class for all package errors."""


class ConfigError(RosceError, ValueError):
    """Invalid configuration (basis, generator, run options)."""


class DomainError(RosceError, ValueError):
    """A location lies outside its spatial domain."""


class DataError(RosceError, ValueError):
    """Input data is malformed or non-finite."""


class DegenerateExposureError(RosceError):
    """The exposure carries no variation to identify an effect from."""


class MissingRegionError(RosceError):
    """One or more discrete regions have no observations."""

    def __init__(self, regions):
        self.regions = sorted(int(r) for r in regions)
        super().__init__(f"no observations in region(s) {self.regions}")


class NumericalError(RosceError):
    """A linear-algebra step failed (e.g. a matrix is not positive definite)."""
