"""Fluid-solid topology optimisation on D = [0,l] x [0,1].

The pressure is the multiplier of the divergence-free constraint. The
primal network outputs ``(u1, u2, phi)``; three adversarial networks carry
the multipliers of

    div u = 0             (field network p over D)
    int phi = C_V |D|     (scalar network lambda1)
    u = g on the boundary (field network lambda2 over the boundary)

and each constraint keeps its own penalty weight.
"""
from dataclasses import dataclass

import numpy as np

from ..diffcore import eval_with_input_grad
from ..errors import ConfigError
from ..sampling import Box, mc_integral
from .base import LossTerms, Problem, add_constraint, l2_norm, scalar, squared_norm

BC_CASES = ("example1", "example2")


@dataclass(frozen=True)
class FluidSolidSpec:
    eps: float = 0.01
    alpha0: float = 250000.0
    C_alpha: float = 100.0
    C_eps: float = 10.0
    C_V: float = 0.5
    length: float = 1.0
    bc_case: str = "example1"

    def __post_init__(self):
        if self.eps <= 0:
            raise ConfigError("eps must be > 0", key="problem.eps")
        if not 0.0 < self.C_V < 1.0:
            raise ConfigError("volume fraction must lie in (0, 1)", key="problem.C_V")
        if self.length <= 0:
            raise ConfigError("domain length must be > 0", key="problem.length")
        if self.bc_case not in BC_CASES:
            raise ConfigError(f"unknown boundary case {self.bc_case!r}", key="problem.bc_case")

    @property
    def box(self):
        return Box((0.0, 0.0), (self.length, 1.0))


def j_alpha(u, grad_u, phi, spec):
    """``1/2 |grad u|^2 + 1/2 alpha0 (1 - phi)^2 |u|^2``.

    ``u`` is ``(B, 2)``, ``grad_u`` ``(B, 2, 2)`` and ``phi`` ``(B,)``; arrays or tape nodes.
    """
    brinkman = (1.0 - phi) * (1.0 - phi) * squared_norm(u)
    return squared_norm(grad_u, axes=2) * 0.5 + brinkman * (0.5 * spec.alpha0)


def double_well(phi):
    """``1/4 phi^2 (1 - phi)^2``."""
    return (phi * phi) * ((1.0 - phi) * (1.0 - phi)) * 0.25


def j_eps(phi, grad_phi, spec):
    """``eps/2 |grad phi|^2 + 1/eps F(phi)``."""
    return squared_norm(grad_phi) * (0.5 * spec.eps) + double_well(phi) * (1.0 / spec.eps)


def _edges(points, length):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    x, y = points[:, 0], points[:, 1]
    return x, y, np.isclose(x, 0.0), np.isclose(x, length)


def bc_example1(points, length=1.0):
    """Inlet ``1/2 sin(pi y)`` on x=0, outlet ``3/2 sin((3y-1) pi)`` for y in [1/3, 2/3] on x=l.

    Returns ``(N, 2)`` boundary velocities; the tangential part is zero.
    """
    x, y, left, right = _edges(points, length)
    g = np.zeros((x.size, 2))
    g[left, 0] = 0.5 * np.sin(np.pi * y[left])
    window = right & (y >= 1.0 / 3.0) & (y <= 2.0 / 3.0)
    g[window, 0] = 1.5 * np.sin((3.0 * y[window] - 1.0) * np.pi)
    return g


def _bumps(y):
    lower = (y >= 1.0 / 6.0) & (y <= 2.0 / 6.0)
    upper = (y >= 4.0 / 6.0) & (y <= 5.0 / 6.0)
    return np.where(lower, 1.0 - (12.0 * y - 3.0) ** 2, 0.0) + np.where(upper, 1.0 - (12.0 * y - 9.0) ** 2, 0.0)


def bc_example2(points, length):
    """Two parabolic bumps, on y in [1/6, 2/6] and [4/6, 5/6], on both x=0 and x=l."""
    x, y, left, right = _edges(points, length)
    g = np.zeros((x.size, 2))
    g[left | right, 0] = _bumps(y[left | right])
    return g


def boundary_velocity(spec, points):
    if spec.bc_case == "example1":
        return bc_example1(points, spec.length)
    return bc_example2(points, spec.length)


def analytic_flux(bc_case):
    """``(inflow through x=0, outflow through x=l)`` of a boundary case."""
    if bc_case == "example1":
        return 1.0 / np.pi, 1.0 / np.pi
    if bc_case == "example2":
        return 2.0 / 9.0, 2.0 / 9.0
    raise ConfigError(f"unknown boundary case {bc_case!r}", key="problem.bc_case")


def threshold_projection(phi):
    """1 where ``phi >= 1/2``, else 0."""
    out = (np.asarray(phi, dtype=float) >= 0.5).astype(int)
    return int(out) if out.ndim == 0 else out


def fluidsolid_loss(spec, jet, batch, boundary_u, boundary, betas, p, lam1, lam2, method="wanco"):
    """Augmented Lagrangian of the fluid-solid problem.

    Args:
        spec: :class:`FluidSolidSpec`
        jet: Jet of the primal network ``(u1, u2, phi)`` over the interior batch
        batch: Interior :class:`~wanco.sampling.SampleBatch`
        boundary_u: ``(M, 2)`` primal velocity at the boundary points
        boundary: :class:`~wanco.sampling.BoundaryBatch`, weighted by arc length
        betas: Penalty weights keyed ``div``, ``volume`` and ``boundary``
        p: ``(B,)`` pressure values at the interior points
        lam1: Scalar multiplier of the volume constraint
        lam2: ``(M, 2)`` boundary multiplier values
        method: ``wanco``, ``drm_p``, ``drm_ap`` or ``lagrange_only``
    """
    u = jet.value[:, :2]
    phi = jet.component(2)
    grad_u = jet.jac[:, :, :2]
    divergence = jet.jac[:, 0, 0] + jet.jac[:, 1, 1]

    dissipation = mc_integral(j_alpha(u, grad_u, phi, spec), batch.weight)
    interface = mc_integral(j_eps(phi, jet.gradient(2), spec), batch.weight)
    terms = {"dissipation": dissipation * spec.C_alpha, "interface": interface * spec.C_eps}

    div_pairing = mc_integral(p * divergence, batch.weight)
    div_squared = mc_integral(divergence * divergence, batch.weight)
    add_constraint(terms, "div", div_pairing, div_squared, betas["div"], method)

    target = spec.C_V * spec.box.volume
    volume = mc_integral(phi, batch.weight)
    volume_residual = volume - target
    add_constraint(terms, "volume", lam1 * volume_residual, volume_residual * volume_residual, betas["volume"], method)

    g = boundary_velocity(spec, boundary.points)
    mismatch = boundary_u - g
    bc_pairing = mc_integral((lam2 * mismatch).sum(axis=-1), boundary.weights)
    bc_squared = mc_integral(squared_norm(mismatch), boundary.weights)
    add_constraint(terms, "boundary", bc_pairing, bc_squared, betas["boundary"], method)

    return LossTerms(
        terms,
        objective=spec.C_alpha * scalar(dissipation) + spec.C_eps * scalar(interface),
        residuals={"div": scalar(div_squared), "volume": scalar(volume_residual), "boundary": scalar(bc_squared)},
        achieved={"div": scalar(div_squared), "volume": scalar(volume), "boundary": scalar(bc_squared)},
        targets={"div": 0.0, "volume": target, "boundary": 0.0},
        multipliers={
            "p": l2_norm(p.data, batch.weight),
            "lambda1": scalar(lam1),
            "lambda2": l2_norm(lam2.data, boundary.weights),
        },
    )


class FluidSolidProblem(Problem):
    family = "fluid"
    channels = ("div", "volume", "boundary")
    multiplier_networks = ("p", "lambda1", "lambda2")
    network_names = ("u", "p", "lambda1", "lambda2")
    default_inner_steps = {"u": 3, "p": 1, "lambda1": 1, "lambda2": 1}

    @property
    def box(self):
        return self.spec.box

    def build_networks(self, overrides):
        self._check_overrides(overrides)
        u = self._resnet(overrides, "u", d_in=2, d_out=3)
        # pressure follows the primal depth and width unless overridden
        shape = {"depth": u.depth, "width": u.width, "activation": u.activation}
        return {
            "u": u,
            "p": self._resnet(overrides, "p", defaults=shape, d_in=2, d_out=1),
            "lambda1": self._scalar(overrides, "lambda1"),
            "lambda2": self._resnet(overrides, "lambda2", d_in=2, d_out=2),
        }

    def loss(self, views, batch, betas, method):
        if batch.boundary is None:
            raise ConfigError("fluid-solid runs need boundary points", key="sampler.n_per_face")
        jet = self.jet(views, "u", batch.interior.points)
        boundary_u = self.jet(views, "u", batch.boundary.points, with_jacobian=False).value[:, :2]
        p = self.jet(views, "p", batch.interior.points, with_jacobian=False).value[:, 0]
        lam1 = self.multiplier(views, "lambda1")[0]
        lam2 = self.jet(views, "lambda2", batch.boundary.points, with_jacobian=False).value
        return fluidsolid_loss(self.spec, jet, batch.interior, boundary_u, batch.boundary, betas, p, lam1, lam2, method)

    def grid_columns(self, store, points):
        out = self.forward(store, "u", points)
        return ["u1", "u2", "phi", "phi_tilde"], np.column_stack([out, threshold_projection(out[:, 2])])

    def diagnostics(self, store, resolution=200, per_edge=256):
        box = self.box
        xs = (np.arange(resolution) + 0.5) / resolution * box.lengths[0]
        ys = (np.arange(resolution) + 0.5) / resolution * box.lengths[1]
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        points = np.column_stack([xx.ravel(), yy.ravel()])
        jet = eval_with_input_grad(self.networks["u"], store, points, network="u")
        phi = jet.value[:, 2]
        divergence = jet.jacobian[:, 0, 0] + jet.jacobian[:, 1, 1]

        t = np.linspace(0.0, 1.0, per_edge)
        edges = np.concatenate([
            np.column_stack([np.zeros(per_edge), t]),
            np.column_stack([np.full(per_edge, box.upper[0]), t]),
            np.column_stack([t * box.upper[0], np.zeros(per_edge)]),
            np.column_stack([t * box.upper[0], np.ones(per_edge)]),
        ])
        mismatch = self.forward(store, "u", edges)[:, :2] - boundary_velocity(self.spec, edges)
        return {
            "volume_fraction": float(phi.mean()),
            "projected_volume_fraction": float(threshold_projection(phi).mean()),
            "divergence_rms": float(np.sqrt(np.mean(divergence**2))),
            "boundary_rms": float(np.sqrt(np.mean(np.sum(mismatch**2, axis=1)))),
        }
