"""``wanco`` command line: train, eval-grid, compare and oracle."""
import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import export, oracles
from .config import load_run_config, variant_configs
from .errors import ConfigError, NonFiniteError, WancoError
from .log import configure_logging
from .params import ChoiceCommaSeparated, ConfigSourceParamType, GridSizesParamType, config_path
from .problems.obstacle import OBSTACLES, obstacle_psi
from .problems.presets import get_preset
from .sampling import Box, grid_points
from .trainer import evaluate_field, train as run_training

log = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_NONFINITE = 2


def reports_errors(fn):
    """Map wanco errors to exit codes, with the message on stderr.

    ``NonFiniteError`` exits with 2; every other wanco error, configuration
    errors included, exits with 1.
    """

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return fn(*args, **kwargs)
        except NonFiniteError as exc:
            click.echo(f"Error: training diverged: {exc}", err=True)
            ctx.exit(EXIT_NONFINITE)
        except ConfigError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)
        except WancoError as exc:
            click.echo(f"Error: {exc}", err=True)
            ctx.exit(EXIT_CONFIG)

    return wrapper


def execute_run(run):
    """Train one :class:`~wanco.config.RunConfig` and write its files into ``run.output``.

    Returns:
        The summary entries written to ``summary.txt``
    """
    out = Path(run.output)
    result = run_training(run.problem, run.train, run.sampler)
    export.write_history(out / "history.csv", result.history)
    export.write_params(out, result.params, run.problem)
    summary = export.run_summary(result, run.problem, run.problem.diagnostics(result.params))
    export.write_summary(out / "summary.txt", summary)
    log.info("wrote history.csv, params.bin, params.json and summary.txt to %s", out)
    return summary


def _compare_row(name, run, summary):
    row = {
        "variant": name,
        "method": run.train.method,
        "activation": run.problem.networks[run.problem.primal].activation,
        "objective": summary["objective"],
    }
    row.update({k: v for k, v in summary.items() if k.startswith(("relerr.", "abserr.", "beta."))})
    return row


@click.group()
@click.option("-v", "--verbose", count=True, help="More log output; repeat for debug messages.")
@click.option("-q", "--quiet", is_flag=True, help="Only log warnings and errors.")
@click.option(
    "--threads",
    type=click.IntRange(min=0),
    default=0,
    envvar="WANCO_THREADS",
    show_default=True,
    help="Worker threads for grid evaluation and compare; 0 runs everything in order on one worker.",
)
@click.version_option(package_name="wanco")
@click.pass_context
def main(ctx, verbose, quiet, threads):
    """Constrained optimization by adversarial augmented-Lagrangian training."""
    configure_logging(-1 if quiet else verbose)
    ctx.obj = {"threads": threads}


def run_options(fn):
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Replaces the config's output directory.")(fn)
    fn = click.option("--seed-override", type=int, default=None, help="Replaces the config's seed.")(fn)
    fn = click.option("--config", "source", type=ConfigSourceParamType(), required=True, help="Run config: path or URL.")(fn)
    return fn


@main.command()
@run_options
@reports_errors
def train(source, seed_override, out):
    """Train the networks of one run config."""
    run = load_run_config(config_path(source), seed_override=seed_override, output=out)
    summary = execute_run(run)
    for key, value in summary.items():
        click.echo(f"{key} = {value}")


@main.command("eval-grid")
@click.option("--params", "params_path", type=click.Path(exists=True), required=True, help="params.bin, params.json or the run directory.")
@click.option("--grid", "sizes", type=GridSizesParamType(), required=True, help="Nodes per axis, e.g. 1000x1000.")
@click.option("--out", type=click.Path(dir_okay=False), default="grid.csv", show_default=True)
@click.pass_obj
@reports_errors
def eval_grid(obj, params_path, sizes, out):
    """Evaluate trained networks on a uniform tensor grid."""
    problem, store = export.read_params(params_path)
    points = grid_points(problem.box, sizes)
    names, _ = problem.grid_columns(store, points[:1])
    values = evaluate_field(lambda chunk: problem.grid_columns(store, chunk)[1], points, threads=obj["threads"])
    path = export.write_grid(out, points, names, values)
    click.echo(f"{path}: {points.shape[0]} rows, columns {','.join(export.coordinate_names(points.shape[1]) + names)}")


@main.command()
@run_options
@click.pass_obj
@reports_errors
def compare(obj, source, seed_override, out):
    """Train every variant listed under ``compare.variants`` and tabulate final errors."""
    run = load_run_config(config_path(source), seed_override=seed_override, output=out)
    variants = variant_configs(run)
    if not variants:
        raise ConfigError("no variants to compare", key="compare.variants")
    log.info("comparing %d variants: %s", len(variants), ", ".join(name for name, _ in variants))

    if obj["threads"]:
        with ThreadPoolExecutor(max_workers=obj["threads"]) as pool:
            summaries = list(pool.map(lambda item: execute_run(item[1]), variants))
    else:
        summaries = [execute_run(variant) for _, variant in variants]

    rows = [_compare_row(name, variant, summary) for (name, variant), summary in zip(variants, summaries)]
    path = export.write_compare(Path(run.output) / "compare.csv", rows)
    for row in rows:
        click.echo("  ".join(f"{k}={v}" for k, v in row.items()))
    click.echo(f"wrote {path}")


@main.group()
def oracle():
    """Reference solutions the trained networks are checked against."""


@oracle.command()
@click.option("--obstacle", type=click.Choice(OBSTACLES), default="psi1", show_default=True)
@click.option("--g0", type=float, default=None, help="Value at x = 0; defaults to the obstacle's preset.")
@click.option("--g1", type=float, default=None, help="Value at x = 1; defaults to the obstacle's preset.")
@click.option("--nodes", type=click.IntRange(min=3), default=oracles.PSOR_NODES, show_default=True)
@click.option("--omega", type=float, default=oracles.PSOR_OMEGA, show_default=True)
@click.option("--tol", type=float, default=oracles.PSOR_TOL, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default="psor.csv", show_default=True)
@reports_errors
def psor(obstacle, g0, g1, nodes, omega, tol, out):
    """Projected SOR solution of a 1-D obstacle problem."""
    preset = get_preset(f"obstacle-{obstacle}")["problem"]
    g0 = preset["g0"] if g0 is None else g0
    g1 = preset["g1"] if g1 is None else g1
    x = np.linspace(0.0, 1.0, nodes)
    psi = obstacle_psi(obstacle, x)
    grid = oracles.obstacle_psor(nodes, psi, g0, g1, omega=omega, tol=tol)
    rows = np.column_stack([grid.x, grid.values, psi]).tolist()
    path = export.write_csv(out, export.ORACLE_SCHEMA, ["x", "u", "psi"], rows)

    contact = oracles.contact_interval(grid, psi)
    click.echo(f"{path}: {nodes} nodes")
    click.echo(f"complementarity residual = {oracles.complementarity_residual(grid, psi):.3e}")
    if contact is None:
        click.echo("contact set is empty")
    else:
        click.echo(f"contact interval = [{contact[0]!r}, {contact[1]!r}]")


@oracle.command()
@click.option("--target", "-V", type=float, default=-0.5, show_default=True, help="Mass target V in (-1, 1).")
@click.option("--out", type=click.Path(dir_okay=False), default="radius.csv", show_default=True)
@reports_errors
def radius(target, out):
    """Sharp-interface radius of the Ginzburg-Landau disc."""
    value = oracles.gl_sharp_interface_radius(target)
    export.write_csv(out, export.ORACLE_SCHEMA, ["V", "radius"], [[target, value]])
    click.echo(repr(value))


@oracle.command()
@click.option(
    "--integrand",
    "names",
    type=ChoiceCommaSeparated(sorted(oracles.INTEGRANDS)),
    default="all",
    show_default=True,
    help="Comma-separated built-in integrands, or all.",
)
@click.option("--dim", type=click.IntRange(1, 3), default=1, show_default=True)
@click.option("--nodes", type=click.IntRange(min=3), default=101, show_default=True, help="Odd node count per axis.")
@click.option("--out", type=click.Path(dir_okay=False), default="quadrature.csv", show_default=True)
@reports_errors
def quadrature(names, dim, nodes, out):
    """Simpson integrals of built-in integrands over the unit cube, against their exact values."""
    box = Box.unit(dim)
    rows = []
    for name in names:
        value, exact = oracles.builtin_quadrature(name, box, nodes)
        rows.append([name, dim, nodes, value, exact, abs(value - exact)])
        click.echo(f"{name}: {value!r} exact {exact!r} error {abs(value - exact):.3e}")
    export.write_csv(out, export.ORACLE_SCHEMA, ["integrand", "dim", "nodes", "value", "exact", "error"], rows)
