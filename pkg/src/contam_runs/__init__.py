"""Longest T-contaminated head runs: exact oracles, closed forms and simulation."""
from .core import CoinSpec, ConfigError, ContamRunsError, DomainError, RunParams, SizeLimitError

__version__ = "0.1.0"

__all__ = ["CoinSpec", "RunParams", "ContamRunsError", "DomainError", "SizeLimitError", "ConfigError", "__version__"]
