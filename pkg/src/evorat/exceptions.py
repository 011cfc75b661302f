class EvoratError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(EvoratError, ValueError):
    """Dimension, length or hyperparameter mismatch."""


class InvalidInputError(EvoratError, ValueError):
    """Data that violates an operation's preconditions."""


class UsageError(EvoratError, RuntimeError):
    """An API used out of order, e.g. backward before forward."""


class GenerationError(EvoratError, RuntimeError):
    """Synthetic data generation could not satisfy its acceptance rules."""


class IngestionError(EvoratError, ValueError):
    """A dataset file or token could not be read."""
