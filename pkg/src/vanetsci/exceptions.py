"""Exception types raised across the package."""


class VanetError(Exception):
    """Base class for package errors."""


class ConfigError(VanetError, ValueError):
    """A configuration violates one of its invariants."""


class UndefinedMetricError(VanetError, ValueError):
    """A graph metric has no defined value on the given graph."""


class FitError(VanetError, ValueError):
    """A fit cannot be attempted on the supplied data."""


class SimulationError(VanetError, RuntimeError):
    """A simulation run could not be carried out."""
