class WancoError(Exception):
    """Base class for every error raised by wanco."""


class ConfigError(WancoError):
    """A run configuration, preset or parameter manifest is invalid.

    Args:
        message: Human readable description
        key: Dotted path of the offending key, if there is one
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class DimensionError(WancoError, ValueError):
    """Input dimension does not match the network description."""


class EmptyBatchError(WancoError, ValueError):
    """A Monte Carlo integral was requested over zero points."""


class ConvergenceError(WancoError):
    """An iterative reference solver hit its iteration cap."""


class NonFiniteError(WancoError, FloatingPointError):
    """A loss term, gradient segment or update produced inf/nan.

    Args:
        message: Human readable description
        where: Name of the parameter segment or loss term that went non-finite
        iteration: Outer training iteration, when raised by the trainer
        breakdown: Mapping of loss term name to value at the failing step
    """

    def __init__(self, message, where=None, iteration=None, breakdown=None):
        self.where = where
        self.iteration = iteration
        self.breakdown = dict(breakdown or {})
        parts = [message]
        if where is not None:
            parts.append(f"at {where}")
        if iteration is not None:
            parts.append(f"(iteration {iteration})")
        if self.breakdown:
            terms = ", ".join(f"{k}={v!r}" for k, v in self.breakdown.items())
            parts.append(f"terms: {terms}")
        super().__init__(" ".join(parts))
