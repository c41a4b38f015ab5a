"""Ginzburg-Landau energy on the unit square with a mass constraint.

    min  int eps/2 |grad u|^2 + 1/eps (u^2 - 1)^2
    s.t. int u = V,  u = -1 on the boundary

The boundary condition is built into the primal network output; the mass
constraint gets a scalar multiplier network.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..sampling import Box, mc_integral
from .base import LossTerms, Problem, add_constraint, scalar, squared_norm


@dataclass(frozen=True)
class GlSpec:
    eps: float = 0.05
    V: float = -0.5
    C0: float = 400.0

    def __post_init__(self):
        if self.eps <= 0:
            raise ConfigError("eps must be > 0", key="problem.eps")


def gl_density(spec, u, grad_u):
    """``eps/2 |grad u|^2 + 1/eps (u^2 - 1)^2`` for arrays or tape nodes."""
    return squared_norm(grad_u) * (0.5 * spec.eps) + ((u * u - 1.0) ** 2) * (1.0 / spec.eps)


def gl_loss(spec, jet, batch, beta, lam, method="wanco"):
    """Augmented Lagrangian of the mass constrained Ginzburg-Landau energy.

    Args:
        spec: :class:`GlSpec`
        jet: Jet of the (transformed) primal network over ``batch``
        batch: Interior :class:`~wanco.sampling.SampleBatch`
        beta: Current penalty weight of the mass constraint
        lam: Scalar multiplier node (ignored by penalty-only methods)
        method: ``wanco``, ``drm_p``, ``drm_ap`` or ``lagrange_only``
    """
    u = jet.component(0)
    energy = mc_integral(gl_density(spec, u, jet.gradient(0)), batch.weight)
    mass = mc_integral(u, batch.weight)
    residual = mass - spec.V

    terms = {"energy": energy * spec.C0}
    add_constraint(terms, "mass", lam * residual, residual * residual, beta, method)
    return LossTerms(
        terms,
        objective=scalar(energy),
        residuals={"mass": scalar(residual)},
        achieved={"mass": scalar(mass)},
        targets={"mass": spec.V},
        multipliers={"lambda": scalar(lam)},
    )


def gl_baseline_loss(kind, spec, jet, batch, beta, lam=None):
    """Penalty (``penalty``), adaptive penalty (``adaptive_penalty``) or multiplier-only (``lagrange_only``) loss.

    The adaptive variant differs from the fixed one only in that the trainer
    amplifies its beta; the loss itself is the same.
    """
    method = {"penalty": "drm_p", "adaptive_penalty": "drm_ap", "lagrange_only": "lagrange_only"}.get(kind)
    if method is None:
        raise ConfigError(f"unknown baseline {kind!r}", key="train.method")
    if lam is None:
        lam = 0.0
    return gl_loss(spec, jet, batch, beta, lam, method)


def sharp_interface_area(u_values, domain_area=1.0):
    """Area of ``{u > 0}`` from values on a uniform grid of cell centres."""
    u_values = np.asarray(u_values)
    return domain_area * float(np.count_nonzero(u_values > 0.0)) / u_values.size


def estimate_interface_radius(u_values, domain_area=1.0):
    """Radius of the disc with the same area as the positive phase."""
    return float(np.sqrt(sharp_interface_area(u_values, domain_area) / np.pi))


class GinzburgLandauProblem(Problem):
    family = "gl"
    channels = ("mass",)
    multiplier_networks = ("lambda",)
    network_names = ("u", "lambda")
    default_inner_steps = {"u": 2, "lambda": 2}

    @property
    def box(self):
        return Box.unit(2)

    def build_networks(self, overrides):
        self._check_overrides(overrides)
        return {
            "u": self._resnet(overrides, "u", d_in=2, d_out=1, output_transform="hard_dirichlet_gl"),
            "lambda": self._scalar(overrides, "lambda"),
        }

    def loss(self, views, batch, betas, method):
        jet = self.jet(views, "u", batch.interior.points)
        lam = self.multiplier(views, "lambda")[0]
        return gl_loss(self.spec, jet, batch.interior, betas["mass"], lam, method)

    def grid_columns(self, store, points):
        return ["u"], self.forward(store, "u", points)

    def diagnostics(self, store, resolution=200):
        centres = (np.arange(resolution) + 0.5) / resolution
        xx, yy = np.meshgrid(centres, centres, indexing="ij")
        u = self.forward(store, "u", np.column_stack([xx.ravel(), yy.ravel()]))[:, 0]
        mass = float(u.mean())
        return {
            "mass": mass,
            "relative_mass_error": (self.spec.V - mass) / self.spec.V,
            "interface_radius": estimate_interface_radius(u),
        }
