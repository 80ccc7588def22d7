"""Factor-graph Bayesian optimization with additive GP surrogates."""

from .errors import (
    ConfigurationError,
    ContractViolationError,
    FgboError,
    NumericalFailureError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractViolationError",
    "FgboError",
    "NumericalFailureError",
    "__version__",
]
