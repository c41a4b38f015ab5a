"""Differentiable evaluation core.

Spatial derivatives of the networks are carried forward as jets (value plus
Jacobian with respect to the input point) through every layer. Parameter
gradients come from a small reverse-mode tape recorded over that extended
forward pass, so terms like ``|grad u|^2`` are differentiated exactly with
respect to the weights (reverse over forward).

All arithmetic is float64 and the reverse sweep visits nodes in a fixed
topological order, so repeated runs are bit-identical.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import netarch
from .errors import DimensionError, NonFiniteError


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Node:
    """One value on the tape.

    ``data`` is a float64 array. A node requires a gradient when it is a
    trainable leaf or depends on one; constants are cut from the tape at
    construction so the reverse sweep never visits them.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    # make numpy hand ``ndarray (op) Node`` back to the Node reflected operators
    __array_ufunc__ = None

    def __init__(self, data, parents=(), backward=None, requires_grad=False, name=""):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = tuple(p for p in parents if p.requires_grad)
        self.requires_grad = requires_grad or bool(self._parents)
        self._backward = backward if self._parents else None
        self.name = name

    def __repr__(self):
        return f"Node(shape={self.data.shape}, name={self.name!r})"

    @classmethod
    def leaf(cls, data, requires_grad=True, name=""):
        return cls(np.array(data, dtype=np.float64), requires_grad=requires_grad, name=name)

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def _accumulate(self, grad):
        if not self.requires_grad:
            return
        self.grad = grad if self.grad is None else self.grad + grad

    # -- arithmetic -----------------------------------------------------------------

    def __add__(self, other):
        other = _wrap(other)
        out = Node(self.data + other.data, (self, other))

        def backward(g):
            self._accumulate(_unbroadcast(g, self.shape))
            other._accumulate(_unbroadcast(g, other.shape))
        out._backward = backward if out._parents else None
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Node(-self.data, (self,))
        out._backward = (lambda g: self._accumulate(-g)) if out._parents else None
        return out

    def __sub__(self, other):
        return self + (-_wrap(other))

    def __rsub__(self, other):
        return _wrap(other) + (-self)

    def __mul__(self, other):
        other = _wrap(other)
        out = Node(self.data * other.data, (self, other))

        def backward(g):
            self._accumulate(_unbroadcast(g * other.data, self.shape))
            other._accumulate(_unbroadcast(g * self.data, other.shape))
        out._backward = backward if out._parents else None
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Node):
            return self * other ** -1
        return self * (1.0 / other)

    def __pow__(self, power):
        if not isinstance(power, (int, float)):
            raise TypeError(f"only constant real exponents are supported, got {type(power)}")
        out = Node(self.data ** power, (self,))

        def backward(g):
            self._accumulate(g * power * self.data ** (power - 1))
        out._backward = backward if out._parents else None
        return out

    def matmul_t(self, weight):
        """``self @ weight.T`` for a 2-D ``weight``; ``self`` may carry any leading axes."""
        weight = _wrap(weight)
        out = Node(self.data @ weight.data.T, (self, weight))

        def backward(g):
            self._accumulate(g @ weight.data)
            if weight.requires_grad:
                n_out, n_in = weight.shape
                weight._accumulate(g.reshape(-1, n_out).T @ self.data.reshape(-1, n_in))
        out._backward = backward if out._parents else None
        return out

    # -- elementwise ----------------------------------------------------------------

    def relu(self):
        mask = self.data > 0.0
        out = Node(np.where(mask, self.data, 0.0), (self,))
        out._backward = (lambda g: self._accumulate(g * mask)) if out._parents else None
        return out

    def step(self):
        """Heaviside step of the value, treated as a constant (its derivative is 0 a.e.)."""
        return Node((self.data > 0.0).astype(np.float64))

    def act(self, kind):
        """Activation value; the backward pass uses its first derivative."""
        fn = netarch.get_activation(kind)
        out = Node(fn.value(self.data), (self,))
        out._backward = (lambda g: self._accumulate(g * fn.first(self.data))) if out._parents else None
        return out

    def act_prime(self, kind):
        """Activation first derivative; the backward pass uses the second derivative."""
        fn = netarch.get_activation(kind)
        out = Node(fn.first(self.data), (self,))
        out._backward = (lambda g: self._accumulate(g * fn.second(self.data))) if out._parents else None
        return out

    # -- reductions and shape -------------------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Node(self.data.sum(axis=axis, keepdims=keepdims), (self,))

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            self._accumulate(np.broadcast_to(g, self.shape).copy())
        out._backward = backward if out._parents else None
        return out

    def mean(self, axis=None):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis) * (1.0 / count)

    def reshape(self, *shape):
        out = Node(self.data.reshape(*shape), (self,))
        out._backward = (lambda g: self._accumulate(g.reshape(self.shape))) if out._parents else None
        return out

    def __getitem__(self, index):
        out = Node(self.data[index], (self,))

        def backward(g):
            full = np.zeros_like(self.data)
            if _is_basic_index(index):
                full[index] += g
            else:
                np.add.at(full, index, g)
            self._accumulate(full)
        out._backward = backward if out._parents else None
        return out

    # -- reverse sweep --------------------------------------------------------------

    def backward(self):
        """Fill ``.grad`` on every node reachable from this scalar."""
        if self.data.size != 1:
            raise DimensionError(f"backward needs a scalar, got shape {self.shape}")
        order = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in reversed(node._parents):
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _wrap(value):
    return value if isinstance(value, Node) else Node(value)


def _is_basic_index(index):
    parts = index if isinstance(index, tuple) else (index,)
    return all(isinstance(p, (int, slice)) or p is None or p is Ellipsis for p in parts)


def stack(nodes, axis=-1):
    """Stack nodes of equal shape along a new axis."""
    nodes = [_wrap(n) for n in nodes]
    out = Node(np.stack([n.data for n in nodes], axis=axis), nodes)

    def backward(g):
        for i, n in enumerate(nodes):
            n._accumulate(np.take(g, i, axis=axis))
    out._backward = backward if out._parents else None
    return out


def total(nodes):
    """Sum a sequence of scalar nodes in order."""
    result = None
    for n in nodes:
        result = n if result is None else result + n
    return result if result is not None else Node(0.0)


@dataclass(frozen=True)
class Segment:
    name: str
    offset: int
    length: int
    shape: tuple

    @property
    def network(self):
        return self.name.split(".", 1)[0]


class ParamStore:
    """Flat parameter vector of every network in a run, cut into named segments.

    Segments are named ``<network>.<layer>`` (``u.W_in``, ``lambda.b_out``...),
    are contiguous per network and tile ``values`` exactly.
    """

    def __init__(self, values, segments, networks):
        self.values = np.asarray(values, dtype=np.float64)
        self.segments = list(segments)
        self.networks = dict(networks)
        self._check()

    def _check(self):
        offset = 0
        for seg in self.segments:
            if seg.offset != offset or seg.length != int(np.prod(seg.shape)):
                raise DimensionError(f"segment {seg.name} does not tile the parameter vector")
            offset += seg.length
        if offset != self.values.size:
            raise DimensionError(f"segments cover {offset} entries, vector has {self.values.size}")
        bad = self.first_nonfinite(self.values)
        if bad is not None:
            raise NonFiniteError("non-finite parameter", where=bad)

    @classmethod
    def from_networks(cls, networks, seed):
        """Initialise every network; network ``i`` draws from ``default_rng([seed, i])``."""
        values = []
        segments = []
        offset = 0
        for index, (net, config) in enumerate(networks.items()):
            values.append(netarch.init_params(config, [seed, index]))
            for layer, shape in netarch.param_layout(config):
                length = int(np.prod(shape))
                segments.append(Segment(f"{net}.{layer}", offset, length, tuple(shape)))
                offset += length
        return cls(np.concatenate(values), segments, networks)

    def copy(self):
        return ParamStore(self.values.copy(), self.segments, self.networks)

    def network_slice(self, net):
        segs = [s for s in self.segments if s.network == net]
        if not segs:
            raise KeyError(net)
        return slice(segs[0].offset, segs[-1].offset + segs[-1].length)

    def network_values(self, net):
        return self.values[self.network_slice(net)]

    def first_nonfinite(self, vector):
        """Name of the first segment holding a non-finite entry of ``vector``, or None."""
        for seg in self.segments:
            if not np.all(np.isfinite(vector[seg.offset:seg.offset + seg.length])):
                return seg.name
        return None

    def leaves(self, trainable=None):
        """One tape leaf per network; only those in ``trainable`` (default all) need gradients."""
        return {
            net: Node.leaf(self.network_values(net), requires_grad=trainable is None or net in trainable, name=net)
            for net in self.networks
        }

    def views(self, leaves):
        """Shaped per-layer nodes sliced out of the network leaves."""
        out = {}
        for net, leaf in leaves.items():
            start = self.network_slice(net).start
            layers = {}
            for seg in self.segments:
                if seg.network != net:
                    continue
                lo = seg.offset - start
                layers[seg.name.split(".", 1)[1]] = leaf[lo:lo + seg.length].reshape(seg.shape)
            out[net] = layers
        return out


@dataclass
class AdjointAccumulator:
    """Gradient of a scalar loss with respect to every entry of a :class:`ParamStore`."""

    grad: np.ndarray

    @classmethod
    def zeros(cls, size):
        return cls(np.zeros(size))

    def add(self, other, scale=1.0):
        self.grad = self.grad + scale * np.asarray(getattr(other, "grad", other))
        return self

    def network(self, store, net):
        return self.grad[store.network_slice(net)]


class NodeJet(NamedTuple):
    """Jet on the tape: ``value`` is ``(B, n)``, ``jac`` is ``(B, d, n)``."""

    value: Node
    jac: Node

    def component(self, i):
        return self.value[:, i]

    def gradient(self, i):
        """``(B, d)`` spatial gradient of output ``i``."""
        return self.jac[:, :, i]


@dataclass
class SpatialJet:
    """Network output plus Jacobian with respect to the input point.

    ``jacobian`` is ``(n_out, d)`` for a single point and ``(B, n_out, d)`` for a batch.
    """

    value: np.ndarray
    jacobian: np.ndarray


def _transform_jet(config, raw, jraw, x):
    kind = config.output_transform
    batch, n = raw.shape
    if kind == "identity":
        return raw, jraw
    if kind == "hard_dirichlet_gl":
        m = netarch.boundary_factor(x)
        gm = netarch.boundary_factor_grad(x)
        value = raw * m[:, None] - 1.0
        jac = jraw * m[:, None, None] + raw.reshape(batch, 1, n) * gm[:, :, None]
        return value, jac
    if kind == "partition_nonneg_dirichlet":
        m = netarch.boundary_factor(x)
        gm = netarch.boundary_factor_grad(x)
        pos = raw.relu()
        gate = raw.step().reshape(batch, 1, n)
        value = pos * m[:, None]
        jac = jraw * gate * m[:, None, None] + pos.reshape(batch, 1, n) * gm[:, :, None]
        return value, jac
    if kind == "obstacle_affine":
        g0, g1 = config.transform_args
        t = x[:, 0]
        value = raw * (t * (1.0 - t))[:, None] + (g0 * (1.0 - t) + g1 * t)[:, None]
        jac = jraw * (t * (1.0 - t))[:, None, None] + (raw * (1.0 - 2.0 * t)[:, None] + (g1 - g0)).reshape(batch, 1, n)
        return value, jac
    if kind == "nonneg":
        return raw.relu(), jraw * raw.step().reshape(batch, 1, n)
    # nonpos: -relu(-raw), derivative step(-raw)
    neg = -raw
    return -(neg.relu()), jraw * neg.step().reshape(batch, 1, n)


def forward_jet(config, layers, x, with_jacobian=True):
    """Differentiable jet of a residual network over a batch of points.

    Args:
        config: :class:`wanco.netarch.ResNetConfig`
        layers: Per-layer nodes from :meth:`ParamStore.views`
        x: ``(B, d_in)`` points
        with_jacobian: Skip the Jacobian pathway when only values are needed

    Returns:
        NodeJet; ``jac`` is None when ``with_jacobian`` is False
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != config.d_in:
        raise DimensionError(f"expected points of dimension {config.d_in}, got shape {x.shape}")
    batch, d = x.shape

    if config.input_transform == "periodic_embed":
        h0 = netarch.periodic_embed(x)
        j0 = netarch.periodic_embed_jacobian(x)
    else:
        h0 = x
        j0 = np.broadcast_to(np.eye(d), (batch, d, d))

    h = Node(h0).matmul_t(layers["W_in"]) + layers["b_in"]
    jac = Node(j0).matmul_t(layers["W_in"]) if with_jacobian else None
    for k in range(1, config.depth + 1):
        w, b = layers[f"W_{k}"], layers[f"b_{k}"]
        z = h.matmul_t(w) + b
        if with_jacobian:
            gate = z.act_prime(config.activation).reshape(batch, 1, config.width)
            jac = gate * jac.matmul_t(w) + jac
        h = z.act(config.activation) + h
    raw = h.matmul_t(layers["W_out"]) + layers["b_out"]
    jraw = jac.matmul_t(layers["W_out"]) if with_jacobian else None

    if not with_jacobian:
        # constant zero Jacobian, dropped from the tape
        value, _ = _transform_jet(config, raw, Node(np.zeros((batch, d, config.d_out))), x)
        return NodeJet(value, None)
    value, jac = _transform_jet(config, raw, jraw, x)
    return NodeJet(value, jac)


def multiplier_value(config, layers):
    """Differentiable value ``(d_out,)`` of a constant-input multiplier network."""
    hidden = layers["b_1"].act(config.activation).reshape(1, config.width)
    return hidden.matmul_t(layers["W_out"])[0] + layers["b_out"]


def _layers_for(config, params, network=None):
    if isinstance(params, ParamStore):
        if network is None:
            raise ValueError("network name is required when passing a ParamStore")
        values = params.network_values(network)
    else:
        values = np.asarray(params, dtype=np.float64)
    return {name: Node(v) for name, v in netarch.unpack(config, values).items()}


def eval_with_input_grad(config, params, x, network=None):
    """Exact value and input Jacobian of a network at one point or a batch.

    ``params`` is the network's flat parameter vector, or a :class:`ParamStore`
    together with the ``network`` name.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != config.d_in:
        raise DimensionError(f"expected points of dimension {config.d_in}, got shape {x.shape}")
    jet = forward_jet(config, _layers_for(config, params, network), batch)
    value = jet.value.data
    jacobian = np.swapaxes(jet.jac.data, 1, 2)
    if single:
        return SpatialJet(value[0], jacobian[0])
    return SpatialJet(value, jacobian)


def value_and_grad(loss_fn, params, trainable=None):
    """Run ``loss_fn(views)`` on the tape and back-propagate its total.

    ``loss_fn`` receives the per-network layer views and returns either a scalar
    :class:`Node` or an object with a ``total`` node (a loss breakdown). Only
    networks in ``trainable`` (default all) receive gradients; the rest are
    held constant and their entries of the gradient are zero.

    Returns:
        ``(result, AdjointAccumulator)``

    Raises:
        NonFiniteError: naming the first parameter segment with a non-finite gradient
    """
    leaves = params.leaves(trainable)
    result = loss_fn(params.views(leaves))
    loss = result if isinstance(result, Node) else result.total
    acc = AdjointAccumulator.zeros(params.values.size)
    if loss.requires_grad:
        loss.backward()
        for net, leaf in leaves.items():
            if leaf.grad is not None:
                acc.grad[params.network_slice(net)] = leaf.grad
    bad = params.first_nonfinite(acc.grad)
    if bad is not None:
        raise NonFiniteError("non-finite gradient", where=bad)
    return result, acc


def backprop_loss(loss_fn, params, trainable=None):
    """Exact gradient of ``loss_fn`` with respect to every parameter of ``params``."""
    return value_and_grad(loss_fn, params, trainable)[1]


def finite_diff_grad(evaluator, params, h=1e-5):
    """Central differences with step ``h * max(1, |p_i|)`` per coordinate.

    ``evaluator`` maps a full parameter vector to a float; ``params`` is a
    :class:`ParamStore` or a plain vector.
    """
    if h <= 0:
        raise ValueError("finite difference step must be positive")
    base = np.array(getattr(params, "values", params), dtype=np.float64)
    grad = np.zeros_like(base)
    for i in range(base.size):
        step = h * max(1.0, abs(base[i]))
        shifted = base.copy()
        shifted[i] = base[i] + step
        f_plus = float(evaluator(shifted))
        shifted[i] = base[i] - step
        f_minus = float(evaluator(shifted))
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad
