from dataclasses import fields

from ..errors import ConfigError
from .base import METHODS, Batch, LossTerms, MethodFlags, Problem, add_constraint, method_flags
from .fluid_solid import FluidSolidProblem, FluidSolidSpec
from .ginzburg_landau import GinzburgLandauProblem, GlSpec
from .obstacle import ObstacleProblem, ObstacleSpec
from .partition import PartitionProblem, PartitionSpec
from .presets import PRESETS, get_preset

FAMILIES = {
    "gl": (GinzburgLandauProblem, GlSpec),
    "partition": (PartitionProblem, PartitionSpec),
    "fluid": (FluidSolidProblem, FluidSolidSpec),
    "obstacle": (ObstacleProblem, ObstacleSpec),
}


def build_problem(problem, networks=None):
    """Problem binding from the ``problem`` and ``networks`` sections of a run config.

    Raises:
        ConfigError: On an unknown family or an unknown problem key
    """
    problem = dict(problem)
    family = problem.pop("family", None)
    if family not in FAMILIES:
        raise ConfigError(f"unknown problem family {family!r}, expected one of {sorted(FAMILIES)}", key="problem.family")
    cls, spec_cls = FAMILIES[family]
    types = {f.name: f.type for f in fields(spec_cls)}
    unknown = set(problem) - set(types)
    if unknown:
        raise ConfigError("unknown problem option", key=f"problem.{sorted(unknown)[0]}")
    for key, value in problem.items():
        kind = types[key]
        try:
            problem[key] = kind(float(value)) if kind is int else kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"expected {kind.__name__}, got {value!r}", key=f"problem.{key}") from None
    return cls(spec_cls(**problem), networks or {})


__all__ = [
    "Batch",
    "FAMILIES",
    "FluidSolidProblem",
    "FluidSolidSpec",
    "GinzburgLandauProblem",
    "GlSpec",
    "LossTerms",
    "METHODS",
    "MethodFlags",
    "ObstacleProblem",
    "ObstacleSpec",
    "PRESETS",
    "PartitionProblem",
    "PartitionSpec",
    "Problem",
    "add_constraint",
    "build_problem",
    "get_preset",
    "method_flags",
]
