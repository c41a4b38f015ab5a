"""ResNet approximators, activations and hard-constraint input/output transforms.

Networks follow the residual layout

    x_1     = W_in x_0 + b_in
    x_{k+1} = phi(W_k x_k + b_k) + x_k,   k = 1..depth
    out     = W_out x_{depth+1} + b_out

followed by an output transform that builds boundary or sign constraints into
the network itself. Everything here is plain numpy; the differentiable version
of the same forward pass lives in :mod:`wanco.diffcore`.
"""
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigError, DimensionError


class Activation(NamedTuple):
    value: Callable
    first: Callable
    second: Callable


def _tanh3(t):
    return np.tanh(t) ** 3


def _tanh3_d1(t):
    th = np.tanh(t)
    return 3.0 * th**2 * (1.0 - th**2)


def _tanh3_d2(t):
    th = np.tanh(t)
    return (6.0 * th - 12.0 * th**3) * (1.0 - th**2)


def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _sigmoid_d1(t):
    s = _sigmoid(t)
    return s * (1.0 - s)


def _sigmoid_d2(t):
    s = _sigmoid(t)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _relu(t):
    return np.maximum(t, 0.0)


def _relu_d1(t):
    return (np.asarray(t) > 0.0).astype(float)


def _zeros_like(t):
    return np.zeros_like(np.asarray(t, dtype=float))


ACTIVATIONS = {
    "tanh3": Activation(_tanh3, _tanh3_d1, _tanh3_d2),
    "tanh": Activation(np.tanh, lambda t: 1.0 - np.tanh(t) ** 2, lambda t: -2.0 * np.tanh(t) * (1.0 - np.tanh(t) ** 2)),
    "sigmoid": Activation(_sigmoid, _sigmoid_d1, _sigmoid_d2),
    "relu": Activation(_relu, _relu_d1, _zeros_like),
    # relu^3 is C^2, so its second derivative is the real one
    "relu3": Activation(lambda t: _relu(t) ** 3, lambda t: 3.0 * _relu(t) ** 2, lambda t: 6.0 * _relu(t)),
}

INPUT_TRANSFORMS = ("identity", "periodic_embed")
OUTPUT_TRANSFORMS = (
    "identity",
    "hard_dirichlet_gl",
    "partition_nonneg_dirichlet",
    "obstacle_affine",
    "nonneg",
    "nonpos",
)


def get_activation(kind):
    """Look up an activation triple by name.

    Raises:
        ConfigError: If ``kind`` is not a known activation
    """
    try:
        return ACTIVATIONS[kind]
    except KeyError:
        raise ConfigError(f"unknown activation {kind!r}, expected one of {sorted(ACTIVATIONS)}", key="activation") from None


def activation(kind, t):
    """Return ``(value, first derivative, second derivative)`` of an activation at ``t``.

    Example:
        >>> activation("relu", 2.0)
        (2.0, 1.0, 0.0)
    """
    act = get_activation(kind)
    t = np.asarray(t, dtype=float)
    triple = (act.value(t), act.first(t), act.second(t))
    if t.ndim == 0:
        return tuple(float(v) for v in triple)
    return triple


@dataclass(frozen=True)
class ResNetConfig:
    """Shape and transforms of one residual network.

    ``transform_args`` carries the constants of the output transform, i.e.
    ``(g0, g1)`` for ``obstacle_affine``.
    """

    d_in: int
    d_out: int
    depth: int
    width: int
    activation: str = "tanh3"
    input_transform: str = "identity"
    output_transform: str = "identity"
    transform_args: tuple = field(default_factory=tuple)

    kind = "resnet"

    def __post_init__(self):
        if self.depth < 1 or self.width < 1 or self.d_in < 1 or self.d_out < 1:
            raise ConfigError("d_in, d_out, depth and width must all be >= 1", key="networks")
        get_activation(self.activation)
        if self.input_transform not in INPUT_TRANSFORMS:
            raise ConfigError(f"unknown input transform {self.input_transform!r}", key="input_transform")
        if self.output_transform not in OUTPUT_TRANSFORMS:
            raise ConfigError(f"unknown output transform {self.output_transform!r}", key="output_transform")
        if self.output_transform == "obstacle_affine" and len(self.transform_args) != 2:
            raise ConfigError("obstacle_affine needs transform_args (g0, g1)", key="transform_args")
        object.__setattr__(self, "transform_args", tuple(float(a) for a in self.transform_args))

    @property
    def d_first(self):
        """Width of the vector fed to the input layer."""
        return 2 * self.d_in if self.input_transform == "periodic_embed" else self.d_in


@dataclass(frozen=True)
class ScalarMultiplierConfig:
    """Shallow network with constant input 0, used for x-independent multipliers.

    With the input fixed at 0 the hidden layer reduces to ``phi(b_1)``, so the
    layout holds no input weights: ``b_1``, ``W_out``, ``b_out``.
    """

    d_out: int = 1
    width: int = 10
    activation: str = "tanh3"

    kind = "scalar"

    def __post_init__(self):
        if self.width < 1 or self.d_out < 1:
            raise ConfigError("width and d_out must be >= 1", key="networks")
        get_activation(self.activation)


def param_layout(config):
    """List of ``(name, shape)`` pairs, in storage order, for a network config."""
    w = config.width
    if config.kind == "scalar":
        return [("b_1", (w,)), ("W_out", (config.d_out, w)), ("b_out", (config.d_out,))]

    layout = [("W_in", (w, config.d_first)), ("b_in", (w,))]
    for k in range(1, config.depth + 1):
        layout += [(f"W_{k}", (w, w)), (f"b_{k}", (w,))]
    layout += [("W_out", (config.d_out, w)), ("b_out", (config.d_out,))]
    return layout


def param_count(config):
    return sum(int(np.prod(shape)) for _, shape in param_layout(config))


def init_params(config, seed):
    """Glorot-uniform weights and zero biases, as one flat float64 vector.

    A scalar multiplier network instead draws its hidden bias from the Glorot
    range of a width-by-one layer and starts its output layer at zero: its
    value starts at 0 and every layer is live after the first ascent step.
    """
    rng = np.random.default_rng(seed)
    chunks = []
    if config.kind == "scalar":
        bound = np.sqrt(6.0 / (1 + config.width))
        chunks.append(rng.uniform(-bound, bound, size=config.width))
        chunks.append(np.zeros(config.d_out * config.width + config.d_out))
        return np.concatenate(chunks).astype(np.float64)
    for name, shape in param_layout(config):
        if name.startswith("W"):
            fan_out, fan_in = shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-bound, bound, size=shape).ravel())
        else:
            chunks.append(np.zeros(shape).ravel())
    return np.concatenate(chunks).astype(np.float64)


def unpack(config, flat):
    """Split a flat parameter vector into named, shaped views."""
    flat = np.asarray(flat, dtype=float)
    expected = param_count(config)
    if flat.size != expected:
        raise DimensionError(f"parameter vector has {flat.size} entries, network needs {expected}")
    out = {}
    offset = 0
    for name, shape in param_layout(config):
        size = int(np.prod(shape))
        out[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return out


def periodic_embed(x):
    """Map ``(..., d)`` points to ``(cos 2pi x1, sin 2pi x1, ..., cos 2pi xd, sin 2pi xd)``."""
    x = np.asarray(x, dtype=float)
    angle = 2.0 * np.pi * x
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1).reshape(*x.shape[:-1], 2 * x.shape[-1])


def periodic_embed_jacobian(x):
    """Jacobian of :func:`periodic_embed`, laid out ``(..., d, 2d)``."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    angle = 2.0 * np.pi * x
    jac = np.zeros(x.shape[:-1] + (d, 2 * d))
    for i in range(d):
        jac[..., i, 2 * i] = -2.0 * np.pi * np.sin(angle[..., i])
        jac[..., i, 2 * i + 1] = 2.0 * np.pi * np.cos(angle[..., i])
    return jac


def boundary_factor(x):
    """``prod_i x_i (1 - x_i)`` over the last axis; zero on the unit box boundary."""
    x = np.asarray(x, dtype=float)
    return np.prod(x * (1.0 - x), axis=-1)


def boundary_factor_grad(x):
    """Gradient of :func:`boundary_factor` with respect to each coordinate."""
    x = np.asarray(x, dtype=float)
    factors = x * (1.0 - x)
    grad = np.empty_like(x)
    for k in range(x.shape[-1]):
        others = np.delete(factors, k, axis=-1)
        grad[..., k] = (1.0 - 2.0 * x[..., k]) * np.prod(others, axis=-1)
    return grad


def hard_dirichlet_gl(raw, x):
    """``raw * x1(1-x1) x2(1-x2) - 1``: equals -1 on the boundary of the unit square."""
    return np.asarray(raw, dtype=float) * boundary_factor(x) - 1.0


def partition_nonneg_dirichlet(raw, x):
    """``max(raw, 0) * prod_i x_i(1-x_i)`` componentwise."""
    raw = np.asarray(raw, dtype=float)
    factor = boundary_factor(x)
    return np.maximum(raw, 0.0) * np.asarray(factor)[..., None]


def obstacle_affine(raw, x, g0, g1):
    """``raw x(1-x) + g0 (1-x) + g1 x``: hits g0 at x=0 and g1 at x=1 for any raw."""
    raw = np.asarray(raw, dtype=float)
    x = np.asarray(x, dtype=float)
    return raw * x * (1.0 - x) + g0 * (1.0 - x) + g1 * x


def nonneg_transform(raw):
    return np.maximum(np.asarray(raw, dtype=float), 0.0)


def nonpos_transform(raw):
    """``-max(-raw, 0)``, never positive."""
    return -np.maximum(-np.asarray(raw, dtype=float), 0.0)


def apply_output_transform(config, raw, x):
    """Apply ``config.output_transform`` to a ``(B, d_out)`` raw output at ``(B, d_in)`` points."""
    kind = config.output_transform
    if kind == "identity":
        return raw
    if kind == "hard_dirichlet_gl":
        return hard_dirichlet_gl(raw, x[:, None, :])
    if kind == "partition_nonneg_dirichlet":
        return partition_nonneg_dirichlet(raw, x)
    if kind == "obstacle_affine":
        g0, g1 = config.transform_args
        return obstacle_affine(raw, x[:, :1], g0, g1)
    if kind == "nonneg":
        return nonneg_transform(raw)
    return nonpos_transform(raw)


def _as_batch(config, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != config.d_in:
        raise DimensionError(f"expected points of dimension {config.d_in}, got shape {x.shape}")
    return x, single


def resnet_forward(config, params, x):
    """Evaluate a residual network at one point ``(d,)`` or a batch ``(B, d)``.

    ``params`` is either a flat vector or the dict returned by :func:`unpack`.
    """
    if not isinstance(params, dict):
        params = unpack(config, params)
    x, single = _as_batch(config, x)
    phi = get_activation(config.activation).value

    h = periodic_embed(x) if config.input_transform == "periodic_embed" else x
    h = h @ params["W_in"].T + params["b_in"]
    for k in range(1, config.depth + 1):
        h = phi(h @ params[f"W_{k}"].T + params[f"b_{k}"]) + h
    raw = h @ params["W_out"].T + params["b_out"]
    out = apply_output_transform(config, raw, x)
    return out[0] if single else out


def multiplier_forward(config, params):
    """Value of a constant-input multiplier network, shape ``(d_out,)``."""
    if not isinstance(params, dict):
        params = unpack(config, params)
    phi = get_activation(config.activation).value
    hidden = phi(params["b_1"])
    return params["W_out"] @ hidden + params["b_out"]


def network_to_dict(config):
    data = asdict(config)
    data["kind"] = config.kind
    if "transform_args" in data:
        data["transform_args"] = list(data["transform_args"])
    return data


def network_from_dict(data):
    """Rebuild a network config from :func:`network_to_dict` output or a config file entry."""
    data = dict(data)
    kind = data.pop("kind", "resnet")
    try:
        if kind == "scalar":
            return ScalarMultiplierConfig(**data)
        if kind == "resnet":
            if "transform_args" in data:
                data["transform_args"] = tuple(data["transform_args"])
            return ResNetConfig(**data)
    except TypeError as e:
        raise ConfigError(f"bad network description: {e}", key="networks") from None
    raise ConfigError(f"unknown network kind {kind!r}", key="networks.kind")
