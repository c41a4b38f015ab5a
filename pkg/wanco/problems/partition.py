"""Dirichlet partition of [0,1]^d into n phases with L2-norm preserving constraints."""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..sampling import Box, mc_integral
from .base import LossTerms, Problem, add_constraint, as_array, scalar, squared_norm


@dataclass(frozen=True)
class PartitionSpec:
    eps: float = 0.05
    n: int = 2
    d: int = 2
    bc: str = "dirichlet"
    C0: float = 100.0

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("a partition needs at least 2 phases", key="problem.n")
        if self.d not in (2, 3, 4):
            raise ConfigError("dimension must be 2, 3 or 4", key="problem.d")
        if self.bc not in ("dirichlet", "periodic"):
            raise ConfigError(f"unknown boundary condition {self.bc!r}", key="problem.bc")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0", key="problem.eps")


def interaction_term(u):
    """``sum_{i != j} u_i^2 u_j^2`` over the last axis (arrays or tape nodes)."""
    sq = u * u
    s2 = sq.sum(axis=-1)
    s4 = (sq * sq).sum(axis=-1)
    return s2 * s2 - s4


def norm_residual(norms):
    """``int u_i^2 - 1`` for each phase."""
    return norms - 1.0


def partition_loss(spec, jet, batch, beta, lam, method="wanco"):
    """Augmented Lagrangian of the relaxed Dirichlet partition energy.

    ``lam`` holds one multiplier per phase; the n norm constraints share a
    single penalty weight ``beta``.
    """
    u = jet.value
    dirichlet = squared_norm(jet.jac, axes=2)
    density = dirichlet * (0.5 * spec.eps) + interaction_term(u) * (1.0 / spec.eps)
    energy = mc_integral(density, batch.weight)
    norms = mc_integral(u * u, batch.weight, axis=0)
    residual = norm_residual(norms)

    terms = {"energy": energy * spec.C0}
    add_constraint(terms, "norm", (lam * residual).sum(), (residual * residual).sum(), beta, method)

    norm_values = np.atleast_1d(as_array(norms))
    lam_values = np.atleast_1d(as_array(lam)) * np.ones(norm_values.size)
    return LossTerms(
        terms,
        objective=scalar(energy),
        residuals={f"norm{i + 1}": float(v - 1.0) for i, v in enumerate(norm_values)},
        achieved={f"norm{i + 1}": float(v) for i, v in enumerate(norm_values)},
        targets={f"norm{i + 1}": 1.0 for i in range(norm_values.size)},
        multipliers={f"lambda{i + 1}": float(v) for i, v in enumerate(lam_values)},
    )


def argmax_projection(u):
    """1-based index of the largest phase; ties go to the lowest index."""
    index = np.argmax(np.asarray(u), axis=-1) + 1
    return int(index) if np.ndim(index) == 0 else index


def overlap_integrals(u_values, weight):
    """Matrix of ``int u_i^2 u_j^2`` from field values ``(N, n)`` and quadrature weight(s)."""
    sq = np.asarray(u_values) ** 2
    weight = np.broadcast_to(np.asarray(weight, dtype=float), (sq.shape[0],))
    return (sq * weight[:, None]).T @ sq


class PartitionProblem(Problem):
    family = "partition"
    channels = ("norm",)
    multiplier_networks = ("lambda",)
    network_names = ("u", "lambda")
    default_inner_steps = {"u": 1, "lambda": 1}

    @property
    def box(self):
        return Box.unit(self.spec.d)

    def build_networks(self, overrides):
        self._check_overrides(overrides)
        if self.spec.bc == "dirichlet":
            u = self._resnet(overrides, "u", d_in=self.spec.d, d_out=self.spec.n, output_transform="partition_nonneg_dirichlet")
        else:
            u = self._resnet(overrides, "u", d_in=self.spec.d, d_out=self.spec.n, input_transform="periodic_embed", output_transform="nonneg")
        return {"u": u, "lambda": self._scalar(overrides, "lambda", d_out=self.spec.n)}

    def loss(self, views, batch, betas, method):
        jet = self.jet(views, "u", batch.interior.points)
        lam = self.multiplier(views, "lambda")
        return partition_loss(self.spec, jet, batch.interior, betas["norm"], lam, method)

    def grid_columns(self, store, points):
        u = self.forward(store, "u", points)
        names = [f"u{i + 1}" for i in range(self.spec.n)] + ["phase"]
        return names, np.column_stack([u, argmax_projection(u)])

    def diagnostics(self, store, resolution=None):
        # midpoint rule; coarser in higher dimension
        resolution = resolution or {2: 200, 3: 40, 4: 16}[self.spec.d]
        centres = (np.arange(resolution) + 0.5) / resolution
        mesh = np.meshgrid(*([centres] * self.spec.d), indexing="ij")
        u = self.forward(store, "u", np.column_stack([m.ravel() for m in mesh]))
        weight = 1.0 / u.shape[0]
        norms = (u**2).sum(axis=0) * weight
        overlap = overlap_integrals(u, weight)
        off_diagonal = overlap[~np.eye(self.spec.n, dtype=bool)]
        out = {f"norm{i + 1}": float(v) for i, v in enumerate(norms)}
        out["max_overlap"] = float(off_diagonal.max())
        out["min_value"] = float(u.min())
        return out
