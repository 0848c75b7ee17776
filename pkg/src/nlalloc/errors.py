"""Exception hierarchy shared by all modules."""


class AllocError(Exception):
    """Base class for errors raised by nlalloc."""


class ParameterError(AllocError, ValueError):
    """A parameter is outside its admissible range."""


class DimensionError(AllocError, ValueError):
    """Array shapes or agent counts do not agree."""


class PreconditionError(AllocError, ValueError):
    """An operation was called on an input that violates its precondition."""


class DegenerateCouplingError(PreconditionError):
    """The coupling vector cannot distribute the resource (e.g. sum(a) == 0)."""


class UnboundedGradientError(AllocError, ArithmeticError):
    """Gradient inversion failed to bracket a root."""


class IntegrationError(AllocError, RuntimeError):
    """The integrated state became non-finite."""

    def __init__(self, message, t=None):
        super().__init__(message if t is None else f"{message} (t={t:.6g})")
        self.t = t


class ConfigError(AllocError, ValueError):
    """An experiment config file is malformed or references unknown values."""
