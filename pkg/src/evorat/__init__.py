"""Genetic search for select-then-predict rationalizers."""

from .exceptions import (ConfigurationError, EvoratError, GenerationError, IngestionError,
                         InvalidInputError, UsageError)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "EvoratError", "GenerationError", "IngestionError",
    "InvalidInputError", "UsageError", "__version__",
]
