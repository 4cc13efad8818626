"""Exception hierarchy shared by the library and the CLI."""


class EqDiscError(Exception):
    """Base class for all package errors."""


class ConfigError(EqDiscError, ValueError):
    """Invalid configuration or precondition violation."""


class DataError(ConfigError):
    """A dataset is malformed, incomplete or non-finite."""


class NumericalError(EqDiscError, ArithmeticError):
    """A numerical procedure could not be completed."""


class ConditioningError(NumericalError):
    """Cholesky factorisation failed even after the jitter schedule."""


class IntegrationDivergenceError(NumericalError):
    """The ODE integrator produced a non-finite state.

    Attributes
    ----------
    index : int
        First sample index holding a non-finite state.
    """

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(message or f"integration diverged: non-finite state at sample {self.index}")


class ConvergenceError(EqDiscError):
    """Chains did not pass the convergence gate."""
