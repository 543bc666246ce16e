"""Quantum and classical Q-learning for D2D dynamic spectrum access."""

__version__ = "0.1.0"

from .errors import ConfigError, UsageError

__all__ = ["ConfigError", "UsageError", "__version__"]
