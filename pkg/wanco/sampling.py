"""Collocation points and Monte Carlo integrals.

Random draws use numpy's ``Generator`` on the PCG64 bit generator, seeded with
``(seed, stream)`` pairs through ``SeedSequence`` so every iteration of a run
gets an independent, reproducible stream.
"""
import functools
from dataclasses import dataclass

import numpy as np

from .diffcore import Node
from .errors import ConfigError, EmptyBatchError

PRIME_BASES = (2, 3, 5)


@dataclass(frozen=True)
class Box:
    """Axis aligned box ``[lower_i, upper_i]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper) or not lower:
            raise ConfigError("box bounds must have the same, non-zero length", key="domain")
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            raise ConfigError(f"degenerate box {lower} x {upper}", key="domain")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def unit(cls, d):
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def lengths(self):
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    def face_measure(self, axis):
        """Measure of the faces orthogonal to ``axis``; a 1-D face is a point of measure 1."""
        return float(np.prod(np.delete(self.lengths, axis)))

    @property
    def boundary_measure(self):
        return 2.0 * sum(self.face_measure(axis) for axis in range(self.dim))

    def contains(self, points, tol=0.0):
        points = np.atleast_2d(points)
        return np.all((points >= np.subtract(self.lower, tol)) & (points <= np.add(self.upper, tol)), axis=1)


@dataclass
class SampleBatch:
    """Interior points with the uniform quadrature weight ``volume / N``."""

    points: np.ndarray
    weight: float

    def __len__(self):
        return self.points.shape[0]


@dataclass
class BoundaryBatch:
    """Boundary points, the face each lies on, and per-point weights (face measure / points on face).

    Face ids run ``2*axis`` for the lower face and ``2*axis + 1`` for the upper face.
    """

    points: np.ndarray
    face_ids: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.points.shape[0]


def _rng(seed, stream=0):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


def sample_uniform(box, n, seed, stream=0):
    """``n`` i.i.d. uniform points in ``box``; deterministic in ``(seed, stream)``."""
    if n < 1:
        raise ConfigError("number of points must be >= 1", key="sampler.n_interior")
    rng = _rng(seed, stream)
    points = np.asarray(box.lower) + rng.random((n, box.dim)) * box.lengths
    return SampleBatch(points, box.volume / n)


def radical_inverse(index, base):
    """Van der Corput radical inverse of integer ``index`` in ``base``."""
    result = 0.0
    scale = 1.0 / base
    while index > 0:
        index, digit = divmod(index, base)
        result += digit * scale
        scale /= base
    return result


@functools.lru_cache(maxsize=8)
def _unit_hammersley(n, d):
    unit = np.empty((n, d))
    unit[:, 0] = np.arange(n) / n
    for axis in range(1, d):
        base = PRIME_BASES[axis - 1]
        unit[:, axis] = [radical_inverse(i, base) for i in range(n)]
    unit.setflags(write=False)
    return unit


def hammersley(n, d, box=None):
    """Hammersley point set: point ``i`` is ``(i/n, phi_2(i), phi_3(i), phi_5(i))`` truncated to ``d``.

    Scaled into ``box`` (default the unit box). The set is deterministic.
    """
    if n < 1:
        raise ConfigError("number of points must be >= 1", key="sampler.n_interior")
    if d - 1 > len(PRIME_BASES):
        raise ConfigError(f"hammersley supports d <= {len(PRIME_BASES) + 1}", key="problem.d")
    box = box or Box.unit(d)
    unit = _unit_hammersley(n, d)
    return SampleBatch(np.asarray(box.lower) + unit * box.lengths, box.volume / n)


def sample_boundary_box(box, n_per_face, seed, stream=0):
    """Uniform points on each of the ``2d`` faces of ``box``."""
    if n_per_face < 1:
        raise ConfigError("points per face must be >= 1", key="sampler.n_per_face")
    rng = _rng(seed, stream)
    points, faces, weights = [], [], []
    for axis in range(box.dim):
        for side, level in enumerate((box.lower[axis], box.upper[axis])):
            face = np.asarray(box.lower) + rng.random((n_per_face, box.dim)) * box.lengths
            face[:, axis] = level
            points.append(face)
            faces.append(np.full(n_per_face, 2 * axis + side))
            weights.append(np.full(n_per_face, box.face_measure(axis) / n_per_face))
    return BoundaryBatch(np.concatenate(points), np.concatenate(faces), np.concatenate(weights))


def mc_integral(values, weight, axis=None):
    """Monte Carlo estimate ``sum(values * weight)``.

    ``values`` may be a numpy array or a tape node; ``weight`` is the scalar
    uniform weight of a :class:`SampleBatch` or the per-point weights of a
    :class:`BoundaryBatch`. With ``axis=0`` each trailing component of a
    ``(N, n)`` batch is integrated separately.

    Raises:
        EmptyBatchError: If there are no values
    """
    if not isinstance(values, Node):
        values = np.asarray(values, dtype=float)
    size = values.data.size if isinstance(values, Node) else values.size
    if size == 0:
        raise EmptyBatchError("Monte Carlo integral over an empty batch")
    if np.ndim(weight) == 0:
        return values.sum(axis=axis) * float(weight)
    if np.ndim(weight) == 1 and len(values.shape) > 1:
        weight = np.reshape(weight, (-1,) + (1,) * (len(values.shape) - 1))
    return (values * weight).sum(axis=axis)


def grid_points(box, sizes):
    """Tensor grid with ``sizes[i]`` nodes per axis (ends included), row-major, last axis fastest."""
    if len(sizes) != box.dim:
        raise ConfigError(f"grid needs {box.dim} sizes, got {len(sizes)}", key="grid")
    axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in zip(box.lower, box.upper, sizes)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class Sampler:
    """Per-run collocation policy.

    ``uniform`` draws a fresh batch for every outer iteration from
    ``(seed, iteration)``; ``hammersley`` uses the same fixed point set each time.
    Boundary points, when ``n_per_face`` is set, are always uniform and are
    redrawn alongside the interior batch.
    """

    kind: str = "uniform"
    n_interior: int = 4096
    n_per_face: int = 0

    def __post_init__(self):
        if self.kind not in ("uniform", "hammersley"):
            raise ConfigError(f"unknown sampler {self.kind!r}", key="sampler.kind")
        if self.n_interior < 1:
            raise ConfigError("n_interior must be >= 1", key="sampler.n_interior")
        if self.n_per_face < 0:
            raise ConfigError("n_per_face must be >= 0", key="sampler.n_per_face")

    def interior(self, box, seed, iteration):
        if self.kind == "hammersley":
            return hammersley(self.n_interior, box.dim, box)
        return sample_uniform(box, self.n_interior, seed, stream=2 * iteration)

    def boundary(self, box, seed, iteration):
        if self.n_per_face == 0:
            return None
        return sample_boundary_box(box, self.n_per_face, seed, stream=2 * iteration + 1)
