class CarbonDseError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CarbonDseError, ValueError):
    """Invalid configuration, schema or unit violation in inputs."""


class UsageError(CarbonDseError, ValueError):
    """An operation was called with inconsistent arguments."""


class InfeasibleError(CarbonDseError):
    """A workload or design cannot satisfy the modeled constraints."""
