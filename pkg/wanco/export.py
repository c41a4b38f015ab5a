"""Files written by a run.

Every text file starts with a ``# <schema>`` line naming its layout:

    history.csv   wanco.history/1   one row per recorded iteration
    params.bin                      flat little-endian float64 parameter dump
    params.json   wanco.params/1    segment manifest, network configs, problem spec
    summary.txt   wanco.summary/1   final residuals and grid diagnostics
    grid.csv      wanco.grid/1      field values on a tensor grid, row-major
    compare.csv   wanco.compare/1   one row per compared variant
"""
import csv
import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import netarch
from .diffcore import ParamStore, Segment
from .errors import ConfigError
from .problems import build_problem
from .trainer import constraint_errors

log = logging.getLogger(__name__)

HISTORY_SCHEMA = "wanco.history/1"
PARAMS_SCHEMA = "wanco.params/1"
SUMMARY_SCHEMA = "wanco.summary/1"
GRID_SCHEMA = "wanco.grid/1"
COMPARE_SCHEMA = "wanco.compare/1"
ORACLE_SCHEMA = "wanco.oracle/1"

PARAMS_DTYPE = "<f8"


def _number(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, schema, columns, rows):
    """Write ``rows`` under a schema line and a header row; floats keep full precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        f.write(f"# {schema}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _number(v) for v in row])
    log.debug("wrote %s", path)
    return path


def read_csv(path):
    """``(schema, columns, rows)`` of a file written by :func:`write_csv`; values stay strings."""
    with Path(path).open("r", newline="") as f:
        schema = f.readline().strip().lstrip("#").strip()
        reader = csv.reader(f)
        columns = next(reader)
        return schema, columns, list(reader)


def write_history(path, history):
    return write_csv(path, HISTORY_SCHEMA, history.columns(), history.rows())


def problem_to_dict(problem):
    return {"family": problem.family, **asdict(problem.spec)}


def write_params(directory, store, problem):
    """Write ``params.bin`` and its ``params.json`` manifest into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    store.values.astype(PARAMS_DTYPE).tofile(directory / "params.bin")
    manifest = {
        "schema": PARAMS_SCHEMA,
        "dtype": PARAMS_DTYPE,
        "count": int(store.values.size),
        "segments": [
            {"name": s.name, "offset": s.offset, "length": s.length, "shape": list(s.shape)} for s in store.segments
        ],
        "networks": {name: netarch.network_to_dict(config) for name, config in store.networks.items()},
        "problem": problem_to_dict(problem),
    }
    with (directory / "params.json").open("w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return directory / "params.bin"


def _network_overrides(networks):
    out = {}
    for name, data in networks.items():
        keys = ("width", "activation") if data.get("kind") == "scalar" else ("depth", "width", "activation")
        out[name] = {k: data[k] for k in keys if k in data}
    return out


def read_params(path):
    """Load a parameter dump and rebuild the problem it was trained for.

    ``path`` is ``params.bin``, ``params.json`` or the run directory holding both.

    Returns:
        ``(problem, ParamStore)``

    Raises:
        ConfigError: If the manifest does not match the dump or the networks it describes
    """
    path = Path(path)
    directory = path if path.is_dir() else path.parent
    try:
        with (directory / "params.json").open("r") as f:
            manifest = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read parameter manifest in {directory}: {exc}", key="params") from exc
    if manifest.get("schema") != PARAMS_SCHEMA:
        raise ConfigError(f"unsupported manifest schema {manifest.get('schema')!r}", key="params")

    values = np.fromfile(directory / "params.bin", dtype=manifest.get("dtype", PARAMS_DTYPE)).astype(np.float64)
    if values.size != manifest["count"]:
        raise ConfigError(f"params.bin holds {values.size} values, manifest says {manifest['count']}", key="params")

    networks = {name: netarch.network_from_dict(data) for name, data in manifest["networks"].items()}
    problem = build_problem(manifest["problem"], _network_overrides(manifest["networks"]))
    if problem.networks != networks:
        raise ConfigError("manifest networks do not match the problem they were trained for", key="params")

    segments = [Segment(s["name"], s["offset"], s["length"], tuple(s["shape"])) for s in manifest["segments"]]
    expected = ParamStore.from_networks(networks, 0).segments
    if segments != expected:
        raise ConfigError("manifest segments do not match the network layout", key="params")
    return problem, ParamStore(values, segments, networks)


def write_summary(path, entries):
    """``key = value`` lines under the summary schema line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        f.write(f"# {SUMMARY_SCHEMA}\n")
        for key, value in entries.items():
            f.write(f"{key} = {value if isinstance(value, str) else _number(value)}\n")
    return path


def run_summary(result, problem, diagnostics=None):
    """Summary entries of a finished run: final objective, residuals, errors, betas, diagnostics."""
    final = result.final
    entries = {"family": problem.family, "objective": final.objective}
    for key, value in final.residuals.items():
        entries[f"residual.{key}"] = value
    entries.update(constraint_errors(final))
    for key, value in final.multipliers.items():
        entries[f"mult.{key}"] = value
    for key, value in result.betas.items():
        entries[f"beta.{key}"] = value
    for key, value in (diagnostics or {}).items():
        entries[f"diag.{key}"] = value
    return entries


def coordinate_names(d):
    return ["x", "y"] if d == 2 else ["x"] if d == 1 else [f"x{i + 1}" for i in range(d)]


def write_grid(path, points, names, values):
    """Grid CSV: coordinates followed by the output columns, one row per grid node."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float).reshape(points.shape[0], -1)
    columns = coordinate_names(points.shape[1]) + list(names)
    return write_csv(path, GRID_SCHEMA, columns, np.hstack([points, values]).tolist())


def write_compare(path, rows):
    """``rows`` are dicts sharing their keys; the first row fixes the column order."""
    rows = list(rows)
    columns = list(rows[0]) if rows else ["variant"]
    return write_csv(path, COMPARE_SCHEMA, columns, ([row.get(c, "") for c in columns] for row in rows))
