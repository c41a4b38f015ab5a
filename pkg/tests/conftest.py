import os
import tempfile

import numpy as np
import pytest
import responses
from click.testing import CliRunner

from wanco.diffcore import ParamStore
from wanco.log import configure_logging
from wanco.problems import build_problem
from wanco.problems.base import Batch
from wanco.sampling import sample_boundary_box, sample_uniform


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale training tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def quiet_logging():
    """Fixture that keeps the wanco logger at WARNING between tests."""
    configure_logging(-1)


@pytest.fixture
def cli_runner():
    """Fixture that provides a Click CLI runner."""
    return CliRunner()


@pytest.fixture
def temp_file():
    """Fixture that provides a temporary file that is cleaned up after the test."""
    with tempfile.NamedTemporaryFile(mode='w+', suffix='.yaml', delete=False) as f:
        temp_path = f.name
        yield f

    # Clean up the file after the test
    if os.path.exists(temp_path):
        os.unlink(temp_path)


@pytest.fixture
def mock_responses():
    """Fixture that provides a responses object for mocking HTTP requests."""
    with responses.RequestsMock() as rsps:
        yield rsps


@pytest.fixture
def tiny_problem():
    """Fixture that builds a miniature problem binding of any family."""
    def build(family, **problem):
        networks = {
            "gl": {"u": {"depth": 2, "width": 6}, "lambda": {"width": 4}},
            "partition": {"u": {"depth": 2, "width": 6}, "lambda": {"width": 4}},
            "fluid": {
                "u": {"depth": 2, "width": 6},
                "p": {"depth": 1, "width": 5},
                "lambda1": {"width": 4},
                "lambda2": {"depth": 1, "width": 5},
            },
            "obstacle": {"u": {"depth": 2, "width": 6}, "lambda": {"depth": 1, "width": 5}},
        }[family]
        return build_problem({"family": family, **problem}, networks)
    return build


@pytest.fixture
def tiny_batch():
    """Fixture that draws a small interior (and optionally boundary) batch for a problem."""
    def draw(problem, n=64, n_per_face=0, seed=3):
        interior = sample_uniform(problem.box, n, seed, stream=0)
        boundary = sample_boundary_box(problem.box, n_per_face, seed, stream=1) if n_per_face else None
        return Batch(interior, boundary)
    return draw


@pytest.fixture
def perturbed_store():
    """Fixture that initialises a problem's networks and perturbs them off the zero-bias start."""
    def build(problem, seed=11, scale=0.3):
        store = ParamStore.from_networks(problem.networks, seed)
        rng = np.random.default_rng(seed)
        store.values = store.values + scale * rng.standard_normal(store.values.size)
        return store
    return build


@pytest.fixture
def gl_desk_config(tmp_path):
    """Fixture that writes a tiny GL run config and returns its path."""
    path = tmp_path / "gl.yaml"
    path.write_text(
        "preset: gl-desk\n"
        "networks:\n"
        "  u: {depth: 1, width: 6}\n"
        "  lambda: {width: 4}\n"
        "train:\n"
        "  n_iterations: 6\n"
        "  record_every: 2\n"
        "sampler:\n"
        "  n_interior: 64\n"
        f"output: {tmp_path / 'run'}\n"
    )
    return path
