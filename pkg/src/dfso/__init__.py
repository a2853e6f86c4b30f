"""Distributionally fair stochastic optimization with Wasserstein fairness."""

from .errors import ConstructionError, DfsoError, DomainError, InfeasibleError, ParseError, ResourceError, UnsupportedError

__version__ = "0.1.0"

__all__ = [
    "ConstructionError", "DfsoError", "DomainError", "InfeasibleError", "ParseError", "ResourceError",
    "UnsupportedError", "__version__",
]
