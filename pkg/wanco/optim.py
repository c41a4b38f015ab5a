"""Adam for descent (primal networks) and ascent (multiplier networks)."""
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonFiniteError

DEFAULT_MILESTONES = (0.5, 0.75, 0.9)


@dataclass
class AdamState:
    """Moments and step count of one network's optimizer.

    States persist across outer iterations and are never reset when a
    penalty weight is amplified.
    """

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size), np.zeros(size))


def adam_step(state, params, grad, lr, direction="descent"):
    """One bias-corrected Adam update; returns the new parameter vector.

    ``direction="ascent"`` is descent on the negated gradient.

    Raises:
        NonFiniteError: If ``grad`` holds inf or nan
        ValueError: On a shape mismatch or unknown direction
    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.shape or state.m.shape != params.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("non-finite gradient passed to Adam")
    if direction == "ascent":
        grad = -grad
    elif direction != "descent":
        raise ValueError(f"unknown direction {direction!r}")

    state.t += 1
    state.m = state.b1 * state.m + (1.0 - state.b1) * grad
    state.v = state.b2 * state.v + (1.0 - state.b2) * grad * grad
    m_hat = state.m / (1.0 - state.b1 ** state.t)
    v_hat = state.v / (1.0 - state.b2 ** state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass(frozen=True)
class LrSchedule:
    """Initial rate halved (``factor``) at each milestone, given as fractions of N."""

    initial: float
    milestones: tuple = field(default=DEFAULT_MILESTONES)
    factor: float = 0.5

    def __post_init__(self):
        milestones = tuple(float(m) for m in self.milestones)
        if any(not 0.0 < m < 1.0 for m in milestones) or any(a >= b for a, b in zip(milestones, milestones[1:])):
            raise ConfigError(f"milestones must be strictly increasing in (0, 1), got {milestones}", key="train.milestones")
        if self.initial < 0:
            raise ConfigError("learning rate must be >= 0", key="train.lr")
        object.__setattr__(self, "milestones", milestones)

    @classmethod
    def from_dict(cls, data):
        """Build from ``{"initial": ..., "milestones": [...], "factor": ...}``; a bare number is the initial rate."""
        if isinstance(data, (int, float)):
            return cls(float(data))
        unknown = set(data) - {"initial", "milestones", "factor"}
        if unknown:
            raise ConfigError("unknown learning rate option", key=f"train.lr.{sorted(unknown)[0]}")
        if "initial" not in data:
            raise ConfigError("missing initial learning rate", key="train.lr.initial")
        return cls(
            float(data["initial"]),
            tuple(data.get("milestones", DEFAULT_MILESTONES)),
            float(data.get("factor", 0.5)),
        )


def lr_at(schedule, iteration, n_iterations):
    """Learning rate in force at ``iteration`` of a run of ``n_iterations``."""
    passed = sum(1 for m in schedule.milestones if iteration >= m * n_iterations)
    return schedule.initial * schedule.factor ** passed
