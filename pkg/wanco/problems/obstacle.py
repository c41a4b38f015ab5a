"""One-dimensional obstacle problems on [0, 1].

    min  int |u'|^2   s.t.  u >= psi,  u(0) = g0,  u(1) = g1

The boundary values are built into the primal output and the inequality
gets a non-positive field multiplier.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..sampling import Box, mc_integral
from .base import LossTerms, Problem, add_constraint, l2_norm, scalar, squared_norm

OBSTACLES = ("psi1", "psi2", "psi3")


def _psi1(x):
    x = np.minimum(x, 1.0 - x)
    return np.where(x <= 0.25, 100.0 * x**2, 100.0 * x * (1.0 - x) - 12.5)


def _psi2(x):
    x = np.minimum(x, 1.0 - x)
    return np.where(x <= 0.25, 10.0 * np.sin(2.0 * np.pi * x), 5.0 * np.cos(np.pi * (4.0 * x - 1.0)) + 5.0)


def _psi3(x):
    return 10.0 * np.sin(np.pi * (x + 1.0) ** 2) ** 2


def obstacle_psi(obstacle, x):
    """Evaluate obstacle ``psi1``, ``psi2`` or ``psi3`` at ``x`` in [0, 1].

    ``psi1`` and ``psi2`` are mirrored about x = 1/2.

    Example:
        >>> obstacle_psi("psi1", 0.25)
        6.25
    """
    functions = {"psi1": _psi1, "psi2": _psi2, "psi3": _psi3}
    if obstacle not in functions:
        raise ConfigError(f"unknown obstacle {obstacle!r}, expected one of {OBSTACLES}", key="problem.obstacle")
    x = np.asarray(x, dtype=float)
    out = functions[obstacle](x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ObstacleSpec:
    obstacle: str = "psi1"
    g0: float = 0.0
    g1: float = 0.0
    C0: float = 100.0

    def __post_init__(self):
        if self.obstacle not in OBSTACLES:
            raise ConfigError(f"unknown obstacle {self.obstacle!r}", key="problem.obstacle")


def obstacle_loss(spec, jet, batch, beta, lam, method="wanco"):
    """Augmented Lagrangian of the obstacle problem.

    ``lam`` is the ``(B,)`` multiplier at the batch points and is never
    positive, so ``-int lam (psi - u)`` grows where u dips below psi.
    """
    u = jet.component(0)
    psi = obstacle_psi(spec.obstacle, batch.points[:, 0])
    gap = psi - u

    energy = mc_integral(squared_norm(jet.gradient(0)), batch.weight)
    violation = gap.relu()
    pairing = mc_integral(lam * gap, batch.weight)
    squared = mc_integral(violation * violation, batch.weight)

    terms = {"energy": energy * spec.C0}
    add_constraint(terms, "obstacle", pairing, squared, beta, method)
    return LossTerms(
        terms,
        objective=scalar(energy),
        residuals={"obstacle": scalar(squared)},
        achieved={"obstacle": scalar(squared)},
        targets={"obstacle": 0.0},
        multipliers={"lambda": l2_norm(lam.data, batch.weight)},
    )


class ObstacleProblem(Problem):
    family = "obstacle"
    channels = ("obstacle",)
    multiplier_networks = ("lambda",)
    network_names = ("u", "lambda")
    default_inner_steps = {"u": 2, "lambda": 2}

    @property
    def box(self):
        return Box.unit(1)

    def build_networks(self, overrides):
        self._check_overrides(overrides)
        u = self._resnet(
            overrides, "u", d_in=1, d_out=1, output_transform="obstacle_affine", transform_args=(self.spec.g0, self.spec.g1)
        )
        shape = {"depth": u.depth, "width": u.width, "activation": u.activation}
        return {"u": u, "lambda": self._resnet(overrides, "lambda", defaults=shape, d_in=1, d_out=1, output_transform="nonpos")}

    def loss(self, views, batch, betas, method):
        points = batch.interior.points
        jet = self.jet(views, "u", points)
        lam = self.jet(views, "lambda", points, with_jacobian=False).component(0)
        return obstacle_loss(self.spec, jet, batch.interior, betas["obstacle"], lam, method)

    def grid_columns(self, store, points):
        u = self.forward(store, "u", points)
        return ["u", "psi"], np.column_stack([u, obstacle_psi(self.spec.obstacle, np.asarray(points)[:, 0])])

    def diagnostics(self, store, n=1001):
        x = np.linspace(0.0, 1.0, n)
        u = self.forward(store, "u", x[:, None])[:, 0]
        lam = self.forward(store, "lambda", x[:, None])[:, 0]
        gap = u - obstacle_psi(self.spec.obstacle, x)
        return {
            "min_gap": float(gap.min()),
            "max_violation": float(np.maximum(-gap, 0.0).max()),
            "max_multiplier": float(lam.max()),
            "u0": float(u[0]),
            "u1": float(u[-1]),
        }
