import json

import numpy as np
import pytest

from wanco.errors import ConfigError
from wanco.export import (
    GRID_SCHEMA,
    HISTORY_SCHEMA,
    coordinate_names,
    read_csv,
    read_params,
    run_summary,
    write_compare,
    write_csv,
    write_grid,
    write_history,
    write_params,
    write_summary,
)
from wanco.sampling import Sampler
from wanco.trainer import ConstraintChannel, TrainConfig, train


@pytest.fixture
def gl_result(tiny_problem):
    problem = tiny_problem("gl")
    config = TrainConfig(4, {"mass": ConstraintChannel(100.0, 1.0003)}, record_every=2)
    return problem, train(problem, config, Sampler("uniform", 32))


def test_csv_schema_and_precision(tmp_path):
    """Test the schema line, header and full float precision."""
    path = write_csv(tmp_path / "sub" / "t.csv", "wanco.test/1", ["a", "b", "c"], [[1, 0.1 + 0.2, "x"]])
    assert path.read_text().splitlines() == ["# wanco.test/1", "a,b,c", "1,0.30000000000000004,x"]
    schema, columns, rows = read_csv(path)
    assert schema == "wanco.test/1"
    assert columns == ["a", "b", "c"]
    assert float(rows[0][1]) == 0.1 + 0.2


def test_history_file(tmp_path, gl_result):
    """Test the history file layout of a short run."""
    _, result = gl_result
    schema, columns, rows = read_csv(write_history(tmp_path / "history.csv", result.history))
    assert schema == HISTORY_SCHEMA
    assert columns == result.history.columns()
    assert [int(r[0]) for r in rows] == [0, 2, 4]


def test_params_round_trip_is_bit_exact(tmp_path, tiny_problem, perturbed_store):
    """Test that a reloaded dump evaluates bit-identically at 100 random points."""
    problem = tiny_problem("fluid")
    store = perturbed_store(problem)
    write_params(tmp_path, store, problem)
    loaded_problem, loaded = read_params(tmp_path / "params.bin")
    assert np.array_equal(loaded.values, store.values)
    assert loaded_problem.spec == problem.spec
    points = np.random.default_rng(4).random((100, 2))
    for net in ("u", "p", "lambda2"):
        assert np.array_equal(loaded_problem.forward(loaded, net, points), problem.forward(store, net, points))


@pytest.mark.parametrize("target", ["dir", "json"])
def test_read_params_accepts_directory_and_manifest(tmp_path, tiny_problem, perturbed_store, target):
    """Test naming a dump by its directory or its manifest."""
    problem = tiny_problem("obstacle", obstacle="psi3", g0=5.0, g1=10.0)
    store = perturbed_store(problem)
    write_params(tmp_path, store, problem)
    path = tmp_path if target == "dir" else tmp_path / "params.json"
    loaded_problem, loaded = read_params(path)
    assert loaded_problem.networks["u"].transform_args == (5.0, 10.0)
    assert np.array_equal(loaded.values, store.values)


def test_params_manifest(tmp_path, tiny_problem, perturbed_store):
    """Test the manifest contents."""
    problem = tiny_problem("gl")
    store = perturbed_store(problem)
    write_params(tmp_path, store, problem)
    manifest = json.loads((tmp_path / "params.json").read_text())
    assert manifest["schema"] == "wanco.params/1"
    assert manifest["dtype"] == "<f8"
    assert manifest["count"] == store.values.size
    assert manifest["problem"] == {"family": "gl", "eps": 0.05, "V": -0.5, "C0": 400.0}
    assert (tmp_path / "params.bin").stat().st_size == 8 * store.values.size


def test_read_params_mismatch(tmp_path, tiny_problem, perturbed_store):
    """Test that a dump that disagrees with its manifest is rejected."""
    problem = tiny_problem("gl")
    store = perturbed_store(problem)
    write_params(tmp_path, store, problem)
    store.values[:-1].astype("<f8").tofile(tmp_path / "params.bin")
    with pytest.raises(ConfigError) as exc:
        read_params(tmp_path)
    assert exc.value.key == "params"


def test_read_params_segment_mismatch(tmp_path, tiny_problem, perturbed_store):
    """Test that an edited segment layout in the manifest is rejected."""
    problem = tiny_problem("gl")
    write_params(tmp_path, perturbed_store(problem), problem)
    manifest = json.loads((tmp_path / "params.json").read_text())
    manifest["segments"][0]["length"] += 1
    (tmp_path / "params.json").write_text(json.dumps(manifest))
    with pytest.raises(ConfigError) as exc:
        read_params(tmp_path)
    assert exc.value.key == "params"


def test_read_params_missing_or_foreign(tmp_path):
    """Test a missing manifest and a manifest of another schema."""
    with pytest.raises(ConfigError) as exc:
        read_params(tmp_path)
    assert exc.value.key == "params"
    (tmp_path / "params.json").write_text('{"schema": "other/1"}')
    with pytest.raises(ConfigError, match="unsupported manifest schema"):
        read_params(tmp_path)


def test_summary(tmp_path, gl_result):
    """Test the summary entries and their file layout."""
    problem, result = gl_result
    entries = run_summary(result, problem, {"interface_radius": 0.3})
    assert entries["family"] == "gl"
    assert entries["beta.mass"] == pytest.approx(100.0 * 1.0003**4)
    assert {"objective", "residual.mass", "relerr.mass", "mult.lambda", "diag.interface_radius"} <= set(entries)
    lines = write_summary(tmp_path / "summary.txt", entries).read_text().splitlines()
    assert lines[0] == "# wanco.summary/1"
    assert lines[1] == "family = gl"
    assert "diag.interface_radius = 0.3" in lines


@pytest.mark.parametrize("d,names", [
    (1, ["x"]),
    (2, ["x", "y"]),
    (3, ["x1", "x2", "x3"]),
    (4, ["x1", "x2", "x3", "x4"]),
])
def test_coordinate_names(d, names):
    """Test coordinate column names per dimension."""
    assert coordinate_names(d) == names


def test_grid_file(tmp_path):
    """Test grid columns and one row per node."""
    points = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    values = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]])
    schema, columns, rows = read_csv(write_grid(tmp_path / "grid.csv", points, ["u1", "u2"], values))
    assert schema == GRID_SCHEMA
    assert columns == ["x", "y", "u1", "u2"]
    assert len(rows) == 4
    assert rows[1] == ["0.0", "1.0", "3.0", "4.0"]


def test_compare_file(tmp_path):
    """Test that the first row fixes the columns."""
    rows = [{"variant": "a", "objective": 1.0}, {"variant": "b", "objective": 2.0, "extra": 3.0}]
    _, columns, body = read_csv(write_compare(tmp_path / "compare.csv", rows))
    assert columns == ["variant", "objective"]
    assert body == [["a", "1.0"], ["b", "2.0"]]
    _, columns, body = read_csv(write_compare(tmp_path / "empty.csv", []))
    assert (columns, body) == (["variant"], [])
