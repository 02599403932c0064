"""Fourier-surface solutions of optimal control problems over a box of initial conditions."""
from .errors import ArgumentError, ConfigError, DataError, FourierOcpError, RunError

__version__ = "0.1.0"

__all__ = ["ArgumentError", "ConfigError", "DataError", "FourierOcpError", "RunError", "__version__"]
