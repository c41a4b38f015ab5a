"""Reference solvers the trained networks are checked against.

Nothing in the training path imports this module.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from .errors import ConfigError, ConvergenceError
from .sampling import Box, grid_points

log = logging.getLogger(__name__)

PSOR_OMEGA = 1.9
PSOR_TOL = 1e-10
PSOR_NODES = 1001


@dataclass
class Grid1D:
    """Nodal values on the uniform grid of ``n`` nodes over [0, 1]."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError("a grid needs at least 3 nodes", key="n")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.n,):
            raise ConfigError(f"expected {self.n} values, got shape {self.values.shape}", key="values")

    @property
    def h(self):
        return 1.0 / (self.n - 1)

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.n)


def obstacle_psor(n, psi, g0, g1, omega=PSOR_OMEGA, tol=PSOR_TOL, max_sweeps=2_000_000):
    """Projected SOR for the discrete obstacle problem ``-u'' = 0, u >= psi, u(0)=g0, u(1)=g1``.

    Sweeps update the odd nodes and then the even ones; each node is relaxed
    towards the average of its neighbours and projected onto ``u >= psi``.

    Args:
        n: Number of grid nodes
        psi: Obstacle sampled at the ``n`` nodes
        g0: Value at x = 0
        g1: Value at x = 1
        omega: Relaxation factor in (1, 2)
        tol: Stop once the largest update of a sweep is below this
        max_sweeps: Iteration cap

    Returns:
        Grid1D with the converged solution

    Raises:
        ConvergenceError: If ``max_sweeps`` sweeps do not reach ``tol``
    """
    if not 1.0 < omega < 2.0:
        raise ConfigError("relaxation factor must lie in (1, 2)", key="omega")
    if tol <= 0:
        raise ConfigError("tolerance must be > 0", key="tol")
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (n,):
        raise ConfigError(f"obstacle must be sampled at {n} nodes", key="psi")

    x = np.linspace(0.0, 1.0, n)
    u = np.maximum(g0 + (g1 - g0) * x, psi)
    u[0], u[-1] = g0, g1
    colours = (np.arange(1, n - 1, 2), np.arange(2, n - 1, 2))
    for sweep in range(1, max_sweeps + 1):
        change = 0.0
        for idx in colours:
            if idx.size == 0:
                continue
            relaxed = (1.0 - omega) * u[idx] + 0.5 * omega * (u[idx - 1] + u[idx + 1])
            updated = np.maximum(relaxed, psi[idx])
            change = max(change, float(np.max(np.abs(updated - u[idx]))))
            u[idx] = updated
        if change < tol:
            log.debug("psor converged after %d sweeps", sweep)
            return Grid1D(n, u)
    raise ConvergenceError(f"projected SOR did not reach tol={tol} in {max_sweeps} sweeps")


def complementarity_residual(grid, psi):
    """Largest ``|min(h^2 (-u''), u - psi)|`` over the interior nodes."""
    u = grid.values
    psi = np.asarray(psi, dtype=float)
    laplace = 2.0 * u[1:-1] - u[:-2] - u[2:]
    return float(np.max(np.abs(np.minimum(laplace, u[1:-1] - psi[1:-1]))))


def contact_interval(grid, psi, tol=1e-8):
    """``(x_first, x_last)`` of the interior nodes where ``u - psi <= tol``, or None without contact.

    The end nodes carry the boundary data and are left out even when the
    obstacle meets it there.
    """
    gap = grid.values - np.asarray(psi, dtype=float)
    touching = np.flatnonzero(gap[1:-1] <= tol) + 1
    if touching.size == 0:
        return None
    x = grid.x
    return float(x[touching[0]]), float(x[touching[-1]])


def gl_sharp_interface_radius(V):
    """Radius of the disc enclosing the positive phase in the sharp-interface limit.

    The phase with u = 1 has area A and the rest u = -1, so ``2A - 1 = V``.

    Example:
        >>> round(gl_sharp_interface_radius(-0.5), 5)
        0.28209
    """
    if not -1.0 < V < 1.0:
        raise ConfigError("mass target must lie in (-1, 1)", key="V")
    return math.sqrt((V + 1.0) / 2.0 / math.pi)


def quadrature_reference(values, box):
    """Composite Simpson integral of ``values`` sampled on the full tensor grid of ``box``.

    ``values`` has one axis per box dimension, each with an odd node count
    (grid ends included, as :func:`wanco.sampling.grid_points` lays them out).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != box.dim:
        raise ConfigError(f"expected a {box.dim}-D grid of values, got {values.ndim}-D", key="grid")
    for size in values.shape:
        if size < 3 or size % 2 == 0:
            raise ConfigError(f"Simpson needs an odd node count >= 3 per axis, got {size}", key="grid")
    result = values
    for axis in reversed(range(box.dim)):
        nodes = np.linspace(box.lower[axis], box.upper[axis], values.shape[axis])
        result = integrate.simpson(result, x=nodes, axis=-1)
    return float(result)


class Integrand(NamedTuple):
    """1-D integrand with antiderivative; in d dimensions the product over coordinates is used."""

    fn: Callable
    antiderivative: Callable

    def __call__(self, points):
        points = np.atleast_2d(points)
        return np.prod(self.fn(points), axis=1)

    def exact(self, box):
        return float(np.prod([self.antiderivative(hi) - self.antiderivative(lo) for lo, hi in zip(box.lower, box.upper)]))


INTEGRANDS = {
    "sin": Integrand(np.sin, lambda t: -math.cos(t)),
    "poly3": Integrand(lambda t: t**3 - 2.0 * t**2 + t + 1.0, lambda t: t**4 / 4 - 2.0 * t**3 / 3 + t**2 / 2 + t),
    "gauss": Integrand(lambda t: np.exp(-t * t), lambda t: 0.5 * math.sqrt(math.pi) * math.erf(t)),
}


def builtin_quadrature(name, box=None, nodes=101):
    """``(Simpson value, analytic value)`` of a built-in integrand on ``box`` (default [0, 1])."""
    if name not in INTEGRANDS:
        raise ConfigError(f"unknown integrand {name!r}, expected one of {sorted(INTEGRANDS)}", key="integrand")
    box = box or Box.unit(1)
    integrand = INTEGRANDS[name]
    values = integrand(grid_points(box, [nodes] * box.dim)).reshape((nodes,) * box.dim)
    return quadrature_reference(values, box), integrand.exact(box)
