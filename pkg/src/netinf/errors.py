"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A parameter is outside its valid domain."""


class GenerationError(RuntimeError):
    """Random network generation exhausted its attempt budget."""


class InsufficientDataError(ValueError):
    """A time series is too short for the requested truncation length."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond recovery (jitter escalation included)."""
