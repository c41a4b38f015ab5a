"""Pieces shared by every problem family.

A problem binding owns its network descriptions, its constraint channels and
a loss assembler. Every constraint enters the loss the same way,

    - lambda . r   (multiplier term, the adversary ascends on it)
    + beta/2 |r|^2 (penalty term, beta amplified every outer iteration)

and the method flags below switch those two pieces on and off to give the
penalty-only and multiplier-only baselines.
"""
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .. import netarch
from ..diffcore import Node, forward_jet, multiplier_value, total
from ..errors import ConfigError, NonFiniteError
from ..sampling import BoundaryBatch, SampleBatch


RESNET_OPTIONS = {"depth": 4, "width": 50, "activation": "tanh3"}


class MethodFlags(NamedTuple):
    multiplier: bool
    penalty: bool
    amplify: bool


METHODS = {
    "wanco": MethodFlags(multiplier=True, penalty=True, amplify=True),
    "drm_p": MethodFlags(multiplier=False, penalty=True, amplify=False),
    "drm_ap": MethodFlags(multiplier=False, penalty=True, amplify=True),
    "lagrange_only": MethodFlags(multiplier=True, penalty=False, amplify=False),
}


def method_flags(method):
    try:
        return METHODS[method]
    except KeyError:
        raise ConfigError(f"unknown method {method!r}, expected one of {sorted(METHODS)}", key="train.method") from None


def add_constraint(terms, name, pairing, squared, beta, method):
    """Append the multiplier and penalty terms of one constraint to ``terms``.

    Args:
        terms: Ordered dict of loss terms, updated in place
        name: Constraint channel name
        pairing: ``lambda . r`` (or its integral for field multipliers)
        squared: ``|r|^2`` (or its integral)
        beta: Current penalty weight of the channel
        method: Key of :data:`METHODS`
    """
    flags = method_flags(method)
    if flags.multiplier:
        terms[f"{name}.multiplier"] = -pairing
    if flags.penalty:
        terms[f"{name}.penalty"] = squared * (0.5 * beta)
    return terms


@dataclass
class LossTerms:
    """Loss breakdown of one evaluation.

    ``achieved`` and ``targets`` hold, per constraint, the quantity the
    constraint pins and the value it should take; targets of 0 mean the
    relative error falls back to the absolute residual.
    """

    terms: dict
    objective: float
    residuals: dict = field(default_factory=dict)
    achieved: dict = field(default_factory=dict)
    targets: dict = field(default_factory=dict)
    multipliers: dict = field(default_factory=dict)

    @property
    def total(self):
        return total(self.terms.values())

    def breakdown(self):
        return {name: float(node.data) for name, node in self.terms.items()}

    def check_finite(self, iteration=None):
        breakdown = self.breakdown()
        for name, value in breakdown.items():
            if not math.isfinite(value):
                raise NonFiniteError("non-finite loss term", where=name, iteration=iteration, breakdown=breakdown)


@dataclass
class Batch:
    interior: SampleBatch
    boundary: BoundaryBatch = None


def as_array(value):
    return value.data if isinstance(value, Node) else np.asarray(value, dtype=float)


def scalar(value):
    return float(as_array(value).reshape(-1)[0])


def l2_norm(values, weight):
    """Discrete L2 norm ``sqrt(sum w |v|^2)`` of a field multiplier over a batch."""
    values = np.asarray(values, dtype=float)
    weight = np.asarray(weight, dtype=float)
    sq = values**2 if values.ndim == 1 else (values**2).sum(axis=1)
    return float(np.sqrt(np.sum(sq * weight)))


def squared_norm(node, axes=1):
    """Sum of squares over the trailing ``axes`` axes (node or array)."""
    sq = node * node
    for _ in range(axes):
        sq = sq.sum(axis=-1)
    return sq


class Problem:
    """Binding of one problem family to the trainer.

    Subclasses set ``family``, ``channels`` (constraint names), ``primal``,
    ``multiplier_networks``, ``default_inner_steps`` and implement
    :meth:`build_networks`, :meth:`loss`, :meth:`grid_columns` and
    :meth:`diagnostics`.
    """

    family = None
    channels = ()
    primal = "u"
    multiplier_networks = ()
    network_names = ()
    default_inner_steps = {}

    def __init__(self, spec, networks=None):
        self.spec = spec
        self.networks = self.build_networks(networks or {})

    @property
    def box(self):
        raise NotImplementedError

    def build_networks(self, overrides):
        raise NotImplementedError

    def _resnet(self, overrides, name, defaults=None, **fixed):
        """ResNetConfig from user overrides (depth, width, activation) plus problem-fixed fields.

        ``defaults`` fills depth, width and activation when the user leaves them out.
        """
        given = dict(overrides.get(name, {}))
        given.pop("kind", None)
        for key in fixed:
            if key in given and given[key] != fixed[key]:
                raise ConfigError(f"{key} is fixed by the problem to {fixed[key]!r}", key=f"networks.{name}.{key}")
            given.pop(key, None)
        unknown = set(given) - set(RESNET_OPTIONS)
        if unknown:
            raise ConfigError("unknown network option", key=f"networks.{name}.{sorted(unknown)[0]}")
        settings = {**RESNET_OPTIONS, **(defaults or {}), **given}
        return netarch.ResNetConfig(**fixed, **settings)

    def _scalar(self, overrides, name, d_out=1):
        given = dict(overrides.get(name, {}))
        given.pop("kind", None)
        unknown = set(given) - {"width", "activation"}
        if unknown:
            raise ConfigError("unknown network option", key=f"networks.{name}.{sorted(unknown)[0]}")
        return netarch.ScalarMultiplierConfig(d_out=d_out, **given)

    def _check_overrides(self, overrides):
        unknown = set(overrides) - set(self.network_names)
        if unknown:
            raise ConfigError("unknown network", key=f"networks.{sorted(unknown)[0]}")

    def sample(self, sampler, seed, iteration):
        return Batch(sampler.interior(self.box, seed, iteration), sampler.boundary(self.box, seed, iteration))

    def jet(self, views, name, points, with_jacobian=True):
        return forward_jet(self.networks[name], views[name], points, with_jacobian)

    def multiplier(self, views, name):
        return multiplier_value(self.networks[name], views[name])

    def loss(self, views, batch, betas, method):
        raise NotImplementedError

    def grid_columns(self, store, points):
        """Column names and ``(N, k)`` values of the output fields at ``points``."""
        raise NotImplementedError

    def diagnostics(self, store):
        """Grid-based summary quantities of a trained run."""
        return {}

    def forward(self, store, name, points):
        return netarch.resnet_forward(self.networks[name], store.network_values(name), points)
