"""Exception hierarchy shared by every module."""


class FourierOcpError(Exception):
    pass


class ArgumentError(FourierOcpError, ValueError):
    """Bad shapes, dimensions or parameter values supplied by the caller."""


class DataError(FourierOcpError, ValueError):
    """Non-finite samples, coefficients or intermediate values."""


class RunError(FourierOcpError, RuntimeError):
    """A solver run that could not complete (divergence, non-convergence).

    ``history`` carries whatever iteration log was collected before failure.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history if history is not None else []


class ConfigError(FourierOcpError, ValueError):
    pass
