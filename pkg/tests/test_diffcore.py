import numpy as np
import pytest

from wanco.diffcore import (
    AdjointAccumulator,
    Node,
    ParamStore,
    backprop_loss,
    eval_with_input_grad,
    finite_diff_grad,
    forward_jet,
    stack,
    total,
    value_and_grad,
)
from wanco.errors import DimensionError, NonFiniteError
from wanco.netarch import ResNetConfig, ScalarMultiplierConfig, init_params, resnet_forward
from wanco.trainer import evaluate_loss


def relative_error(a, b):
    return np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b))


def test_node_product_gradient():
    """Test the gradient of a sum of squares."""
    x = Node.leaf([1.0, -2.0, 3.0])
    (x * x).sum().backward()
    assert np.allclose(x.grad, [2.0, -4.0, 6.0])


def test_node_broadcast_add_reduces_gradient():
    """Test that broadcasting in an addition is summed back out of the gradient."""
    a = Node.leaf(np.ones((4, 3)))
    b = Node.leaf(np.zeros(3))
    ((a + b) * 2.0).sum().backward()
    assert b.grad.shape == (3,)
    assert np.allclose(b.grad, 8.0)
    assert np.allclose(a.grad, 2.0)


def test_node_reflected_operators_with_arrays():
    """Test that numpy arrays on the left hand side dispatch to the node operators."""
    x = Node.leaf([1.0, 2.0])
    out = np.array([3.0, 5.0]) - x
    assert isinstance(out, Node)
    out.sum().backward()
    assert np.allclose(x.grad, [-1.0, -1.0])


def test_node_matmul_gradient():
    """Test the gradients of a batched product with a transposed weight."""
    rng = np.random.default_rng(0)
    x = Node.leaf(rng.standard_normal((5, 3)))
    w = Node.leaf(rng.standard_normal((2, 3)))
    x.matmul_t(w).sum().backward()
    assert np.allclose(x.grad, np.ones((5, 2)) @ w.data)
    assert np.allclose(w.grad, np.ones((5, 2)).T @ x.data)


def test_node_fancy_index_accumulates():
    """Test that repeated fancy indices accumulate their gradient."""
    x = Node.leaf([1.0, 2.0, 3.0])
    x[np.array([0, 0, 2])].sum().backward()
    assert np.allclose(x.grad, [2.0, 0.0, 1.0])


def test_node_power_and_division():
    """Test gradients of powers and divisions by nodes."""
    x = Node.leaf(2.0)
    y = Node.leaf(4.0)
    (x**3 / y).backward()
    assert x.grad == pytest.approx(3.0 * 4.0 / 4.0)
    assert y.grad == pytest.approx(-8.0 / 16.0)


def test_node_power_rejects_node_exponent():
    """Test that only constant exponents are accepted."""
    with pytest.raises(TypeError):
        Node.leaf(2.0) ** Node.leaf(2.0)


def test_stack_and_total():
    """Test stacking nodes and summing a sequence of scalars."""
    a = Node.leaf([1.0, 2.0])
    b = Node.leaf([3.0, 4.0])
    s = stack([a, b], axis=1)
    assert s.shape == (2, 2)
    total([s.sum(), a.sum()]).backward()
    assert np.allclose(a.grad, [2.0, 2.0])
    assert np.allclose(b.grad, [1.0, 1.0])
    assert total([]).item() == 0.0


def test_backward_needs_scalar():
    """Test that the reverse sweep starts from a scalar only."""
    with pytest.raises(DimensionError):
        (Node.leaf([1.0, 2.0]) * 2.0).backward()


def test_constants_are_cut_from_tape():
    """Test that nodes without trainable ancestors do not require gradients."""
    c = Node([1.0, 2.0]) * 3.0
    assert not c.requires_grad
    assert c._backward is None


def test_param_store_segments_tile_vector():
    """Test that segments are contiguous, named per layer and cover the vector."""
    networks = {"u": ResNetConfig(2, 1, 2, 4), "lambda": ScalarMultiplierConfig()}
    store = ParamStore.from_networks(networks, seed=5)
    assert store.segments[0].name == "u.W_in"
    assert store.segments[-1].name == "lambda.b_out"
    assert sum(s.length for s in store.segments) == store.values.size
    lam = store.network_slice("lambda")
    assert lam.stop == store.values.size


def test_param_store_seeds_each_network():
    """Test that network i is drawn from the generator seeded with (seed, i)."""
    networks = {"u": ResNetConfig(2, 1, 2, 4), "lambda": ScalarMultiplierConfig()}
    store = ParamStore.from_networks(networks, seed=5)
    assert np.array_equal(store.network_values("u"), init_params(networks["u"], [5, 0]))
    assert np.array_equal(store.network_values("lambda"), init_params(networks["lambda"], [5, 1]))
    again = ParamStore.from_networks(networks, seed=5)
    assert np.array_equal(store.values, again.values)


def test_param_store_rejects_nonfinite_values():
    """Test that a store cannot hold inf or nan parameters."""
    networks = {"lambda": ScalarMultiplierConfig(width=2)}
    store = ParamStore.from_networks(networks, 0)
    values = store.values.copy()
    values[-1] = np.nan
    with pytest.raises(NonFiniteError) as exc:
        ParamStore(values, store.segments, networks)
    assert exc.value.where == "lambda.b_out"


def test_value_and_grad_only_trainable_networks():
    """Test that frozen networks get no gradient and stay off the tape."""
    networks = {"u": ScalarMultiplierConfig(width=3), "lambda": ScalarMultiplierConfig(width=2)}
    store = ParamStore.from_networks(networks, 1)
    leaves = store.leaves(trainable=("u",))
    assert leaves["u"].requires_grad
    assert not leaves["lambda"].requires_grad

    def loss_fn(views):
        return (views["u"]["b_out"] * views["lambda"]["b_out"] + views["u"]["b_out"] * 2.0).sum()

    _, acc = value_and_grad(loss_fn, store, trainable=("u",))
    assert np.all(acc.network(store, "lambda") == 0.0)
    assert acc.network(store, "u")[-1] == pytest.approx(2.0)


def test_value_and_grad_names_nonfinite_segment():
    """Test that an infinite gradient is reported with the segment it landed in."""
    store = ParamStore.from_networks({"u": ScalarMultiplierConfig(width=2)}, 0)

    def loss_fn(views):
        return (views["u"]["b_out"] ** 0.5).sum()

    with np.errstate(divide="ignore", invalid="ignore"):
        with pytest.raises(NonFiniteError) as exc:
            value_and_grad(loss_fn, store)
    assert exc.value.where == "u.b_out"


def test_repeated_gradients_are_bit_identical(tiny_problem, tiny_batch, perturbed_store):
    """Test that two reverse sweeps over the same loss agree bit for bit."""
    problem = tiny_problem("gl")
    store = perturbed_store(problem)
    batch = tiny_batch(problem)
    first = backprop_loss(lambda v: problem.loss(v, batch, {"mass": 10.0}, "wanco"), store)
    second = backprop_loss(lambda v: problem.loss(v, batch, {"mass": 10.0}, "wanco"), store)
    assert np.array_equal(first.grad, second.grad)


def test_gradient_is_linear_in_the_loss(tiny_problem, tiny_batch, perturbed_store):
    """Test that the gradient of a*L1 + b*L2 is a*grad(L1) + b*grad(L2)."""
    problem = tiny_problem("gl")
    store = perturbed_store(problem)
    batch = tiny_batch(problem)

    a, b = 0.3, -2.5

    def terms(views):
        return problem.loss(views, batch, {"mass": 10.0}, "wanco").terms

    def constraint_loss(views):
        t = terms(views)
        return t["mass.multiplier"] + t["mass.penalty"]

    def combined_loss(views):
        t = terms(views)
        return t["energy"] * a + (t["mass.multiplier"] + t["mass.penalty"]) * b

    energy = backprop_loss(lambda views: terms(views)["energy"], store)
    constraint = backprop_loss(constraint_loss, store)
    combined = backprop_loss(combined_loss, store)
    expected = AdjointAccumulator.zeros(store.values.size).add(energy, a).add(constraint, b)
    assert np.allclose(combined.grad, expected.grad, rtol=1e-10, atol=1e-10 * np.max(np.abs(expected.grad)))
    assert np.any(constraint.network(store, "lambda") != 0.0)


def _family_setup(tiny_problem, tiny_batch, perturbed_store, family, **problem_args):
    problem = tiny_problem(family, **problem_args)
    store = perturbed_store(problem)
    batch = tiny_batch(problem, n=64, n_per_face=8 if family == "fluid" else 0)
    betas = {name: 10.0 for name in problem.channels}

    def evaluator(values):
        shifted = ParamStore(values, store.segments, store.networks)
        return evaluate_loss(problem, shifted, batch, betas, "wanco").total.item()

    grad = backprop_loss(lambda views: problem.loss(views, batch, betas, "wanco"), store).grad
    return store, evaluator, grad


@pytest.mark.parametrize("family,problem_args", [
    ("gl", {}),
    ("fluid", {}),
    ("fluid", {"bc_case": "example2", "length": 1.5, "C_V": 1.0 / 3.0}),
])
def test_loss_gradient_matches_finite_differences(tiny_problem, tiny_batch, perturbed_store, family, problem_args):
    """Test backprop against coordinatewise central differences on smooth losses."""
    store, evaluator, grad = _family_setup(tiny_problem, tiny_batch, perturbed_store, family, **problem_args)
    fd = finite_diff_grad(evaluator, store, h=1e-5)
    assert relative_error(grad, fd) < 1e-4


@pytest.mark.parametrize("family,problem_args", [
    ("partition", {"n": 2}),
    ("partition", {"n": 3, "bc": "periodic"}),
    ("obstacle", {"obstacle": "psi3", "g0": 5.0, "g1": 10.0}),
])
def test_kinked_loss_gradient_matches_directional_differences(tiny_problem, tiny_batch, perturbed_store, family, problem_args):
    """Test backprop against central differences along random directions for losses with relu kinks."""
    store, evaluator, grad = _family_setup(tiny_problem, tiny_batch, perturbed_store, family, **problem_args)
    rng = np.random.default_rng(42)
    h = 1e-6
    exact, approx = [], []
    for _ in range(6):
        direction = rng.standard_normal(store.values.size)
        direction /= np.linalg.norm(direction)
        exact.append(grad @ direction)
        approx.append((evaluator(store.values + h * direction) - evaluator(store.values - h * direction)) / (2.0 * h))
    assert relative_error(exact, approx) < 1e-4


TRANSFORM_CASES = [
    ResNetConfig(2, 1, 2, 8),
    ResNetConfig(2, 1, 2, 8, output_transform="hard_dirichlet_gl"),
    ResNetConfig(2, 3, 2, 8, output_transform="partition_nonneg_dirichlet"),
    ResNetConfig(3, 2, 2, 8, input_transform="periodic_embed", output_transform="nonneg"),
    ResNetConfig(1, 1, 3, 8, output_transform="obstacle_affine", transform_args=(5.0, 10.0)),
    ResNetConfig(1, 1, 2, 8, output_transform="nonpos"),
    ResNetConfig(2, 2, 2, 8, activation="tanh"),
    ResNetConfig(2, 2, 2, 8, activation="sigmoid"),
    ResNetConfig(2, 2, 2, 8, activation="relu3"),
]


def _raw_config(config):
    return ResNetConfig(config.d_in, config.d_out, config.depth, config.width, config.activation, config.input_transform)


@pytest.mark.parametrize("config", TRANSFORM_CASES, ids=lambda c: f"{c.activation}-{c.input_transform}-{c.output_transform}")
def test_input_jacobian_matches_finite_differences(config):
    """Test the exact input Jacobian against central differences at random points."""
    rng = np.random.default_rng(7)
    params = init_params(config, 3) + 0.2 * rng.standard_normal(init_params(config, 3).size)
    x = rng.uniform(0.05, 0.95, size=(100, config.d_in))

    # keep points whose raw outputs are clear of a relu kink
    raw = resnet_forward(_raw_config(config), params, x)
    x = x[np.min(np.abs(raw), axis=1) > 1e-3]

    jet = eval_with_input_grad(config, params, x)
    assert jet.jacobian.shape == (x.shape[0], config.d_out, config.d_in)
    assert np.allclose(jet.value, resnet_forward(config, params, x), rtol=1e-12, atol=1e-12)

    h = 1e-5
    fd = np.empty_like(jet.jacobian)
    for k in range(config.d_in):
        step = np.zeros(config.d_in)
        step[k] = h
        fd[:, :, k] = (resnet_forward(config, params, x + step) - resnet_forward(config, params, x - step)) / (2.0 * h)
    assert relative_error(jet.jacobian, fd) < 1e-6


def test_eval_with_input_grad_single_point_and_store():
    """Test single point evaluation through a parameter store."""
    config = ResNetConfig(2, 1, 2, 4, output_transform="hard_dirichlet_gl")
    store = ParamStore.from_networks({"u": config}, 0)
    jet = eval_with_input_grad(config, store, np.array([0.3, 0.6]), network="u")
    assert jet.value.shape == (1,)
    assert jet.jacobian.shape == (1, 2)
    with pytest.raises(ValueError):
        eval_with_input_grad(config, store, np.array([0.3, 0.6]))


def test_forward_jet_rejects_wrong_dimension():
    """Test that points of the wrong dimension are rejected."""
    config = ResNetConfig(2, 1, 1, 4)
    store = ParamStore.from_networks({"u": config}, 0)
    views = store.views(store.leaves())
    with pytest.raises(DimensionError):
        forward_jet(config, views["u"], np.zeros((5, 3)))


def test_forward_jet_without_jacobian_matches_values():
    """Test that skipping the Jacobian path leaves the values unchanged."""
    config = ResNetConfig(2, 3, 2, 5, output_transform="partition_nonneg_dirichlet")
    store = ParamStore.from_networks({"u": config}, 2)
    views = store.views(store.leaves())
    x = np.random.default_rng(0).random((10, 2))
    full = forward_jet(config, views["u"], x)
    values = forward_jet(config, views["u"], x, with_jacobian=False)
    assert values.jac is None
    assert np.array_equal(full.value.data, values.value.data)
