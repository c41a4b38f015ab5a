"""Desk-scale training runs; each takes minutes on a laptop CPU.

Run with ``pytest --runslow``.
"""
import numpy as np
import pytest

from wanco.config import resolve
from wanco.export import write_history
from wanco.oracles import gl_sharp_interface_radius, obstacle_psor
from wanco.problems.obstacle import obstacle_psi
from wanco.trainer import relative_constraint_error, train

pytestmark = pytest.mark.slow


def run(data):
    config = resolve(data)
    return config, train(config.problem, config.train, config.sampler)


@pytest.fixture(scope="module")
def gl_desk():
    return run({"preset": "gl-desk"})


def test_gl_desk_constraint_and_radius(gl_desk):
    """Test the mass constraint and the interface radius of the desk Ginzburg-Landau run."""
    config, result = gl_desk
    problem = config.problem
    diagnostics = problem.diagnostics(result.params)
    assert abs(diagnostics["relative_mass_error"]) < 0.02
    assert diagnostics["interface_radius"] == pytest.approx(gl_sharp_interface_radius(-0.5), rel=0.15)
    assert abs(result.history.column("relerr.mass")[-1]) < 0.02


def test_gl_multiplier_adapts(gl_desk):
    """Test that the multiplier changes sign and the residual crosses zero in the first half."""
    config, result = gl_desk
    multiplier = result.history.column("mult.lambda")
    assert np.any(np.diff(np.sign(multiplier)) != 0)
    iterations = result.history.column("iteration")
    residual = result.history.column("residual.mass")
    first_half = residual[iterations < 0.5 * config.train.n_iterations]
    assert np.any(np.diff(np.sign(first_half)) != 0)


def test_gl_desk_is_deterministic(gl_desk, tmp_path):
    """Test that a second run with the same seed writes a byte-identical history."""
    _, first = gl_desk
    _, second = run({"preset": "gl-desk"})
    write_history(tmp_path / "a.csv", first.history)
    write_history(tmp_path / "b.csv", second.history)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_gl_desk_final_beta(gl_desk):
    """Test the final penalty weight of the amplified schedule."""
    config, result = gl_desk
    n = config.train.n_iterations
    assert result.betas["mass"] == pytest.approx(1000.0 * 1.0003**n, rel=1e-12)


def test_wanco_beats_penalty_at_small_beta(gl_desk):
    """Test that with beta = 1000 the adversarial method meets the mass constraint better than the plain penalty."""
    config, wanco = gl_desk
    _, penalty = run({"preset": "gl-desk", "train": {"method": "drm_p"}})
    target = config.problem.spec.V
    wanco_error = abs(relative_constraint_error(wanco.final.achieved["mass"], target))
    penalty_error = abs(relative_constraint_error(penalty.final.achieved["mass"], target))
    assert wanco_error < penalty_error
    assert wanco_error < 0.05


@pytest.mark.parametrize("n", [2, 3])
def test_partition_dirichlet_desk(n):
    """Test normalisation, sign and overlap of the desk partition runs."""
    config, result = run({"preset": "partition-desk", "problem": {"n": n}})
    problem = config.problem
    diagnostics = problem.diagnostics(result.params, resolution=201)
    for i in range(1, n + 1):
        assert abs(diagnostics[f"norm{i}"] - 1.0) < 0.05
    assert diagnostics["max_overlap"] < 0.1
    assert diagnostics["min_value"] >= 0.0
    edge = np.array([[0.0, 0.5], [1.0, 0.25], [0.3, 0.0], [0.7, 1.0]])
    assert np.all(problem.forward(result.params, "u", edge) == 0.0)


@pytest.mark.parametrize("preset", ["partition-periodic-d3", "partition-periodic-d4"])
def test_partition_higher_dimension_smoke(preset):
    """Test that 3-D and 4-D periodic partitions train with finite losses and growing betas."""
    _, result = run({
        "preset": preset,
        "networks": {"u": {"width": 16}},
        "train": {"n_iterations": 500},
        "sampler": {"n_interior": 1024},
    })
    assert np.all(np.isfinite(result.history.column("objective")))
    assert np.all(np.diff(result.history.column("beta.norm")) > 0)
    assert np.all(np.isfinite(result.params.values))


@pytest.mark.parametrize("obstacle", ["psi1", "psi2", "psi3"])
def test_obstacle_against_psor(obstacle):
    """Test the trained obstacle solution against projected SOR on 1001 nodes."""
    preset = f"obstacle-{obstacle}"
    config, result = run({"preset": preset, "train": {"n_iterations": 3000}, "sampler": {"n_interior": 1024}})
    problem = config.problem
    x = np.linspace(0.0, 1.0, 1001)
    psi = obstacle_psi(obstacle, x)
    reference = obstacle_psor(1001, psi, problem.spec.g0, problem.spec.g1)
    u = problem.forward(result.params, "u", x[:, None])[:, 0]
    assert np.max(np.abs(u - reference.values)) < 0.2
    assert np.max(psi - u) < 0.01
    assert (u[0], u[-1]) == (problem.spec.g0, problem.spec.g1)


def test_fluid_example1_desk():
    """Test volume fraction, divergence and boundary mismatch of the desk fluid-solid run."""
    config, result = run({"preset": "fluid-desk"})
    problem = config.problem
    diagnostics = problem.diagnostics(result.params)
    assert abs(diagnostics["volume_fraction"] - problem.spec.C_V) < 0.05

    iterations = result.history.column("iteration").tolist()
    divergence = result.history.column("residual.div")
    boundary = result.history.column("residual.boundary")
    assert divergence[-1] < 0.25 * divergence[iterations.index(100)]
    assert boundary[-1] <= 0.1 * boundary[0]
