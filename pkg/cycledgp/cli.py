# -*- coding: utf-8 -*-
"""Command line: `cycledgp solve | generate | verify`."""
from __future__ import annotations

import logging
import sys
from pathlib import Path

import click
import tomli
from pydantic import ValidationError

from cycledgp._customprint import configure_logging, print_checks, print_heading, print_table
from cycledgp.bench import (
    ExperimentSpec,
    RecordStatus,
    ReportFormat,
    generate_instance,
    run_benchmark,
    summary_table,
    verify_instance,
)
from cycledgp.errors import CycleDGPError
from cycledgp.formulations import FormulationKind
from cycledgp.graph import format_instance, read_instance, write_instance
from cycledgp.recovery import RecoveryMode
from cycledgp.solver import SolverConfig

log = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]
EXPERIMENT_KEYS = {"formulations", "recovery", "format", "decompose", "n_jobs"}


def _read_config(path):
    if path is None:
        return {}, {}
    try:
        with open(path, "rb") as handle:
            data = tomli.load(handle)
    except tomli.TOMLDecodeError as exc:
        raise click.BadParameter("{}: {}".format(path, exc), param_hint="--config") from exc
    unknown = set(data) - {"solver", "experiment"}
    experiment = data.get("experiment", {})
    unknown |= {"experiment." + key for key in set(experiment) - EXPERIMENT_KEYS}
    if unknown:
        raise click.BadParameter("unknown keys: {}".format(", ".join(sorted(unknown))), param_hint="--config")
    return dict(data.get("solver", {})), dict(experiment)


def _overrides(**values):
    return {key: value for key, value in values.items() if value is not None}


@click.group()
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default="WARNING",
              show_default=True, help="Verbosity of the log on stderr.")
def main(log_level):
    """Edge, cycle and Eulerian formulations of the distance geometry problem."""
    configure_logging(log_level)


@main.command()
@click.option("--instance", "instances", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Instance file (repeatable).")
@click.option("--formulation", "formulations", multiple=True,
              type=click.Choice([k.value for k in FormulationKind]), help="Formulation to run (repeatable).")
@click.option("--starts", type=int, help="MultiStart starts per formulation.")
@click.option("--seed", type=int, help="Base seed of the start sequence.")
@click.option("--max-iters", type=int, help="Local solver iteration cap.")
@click.option("--tol", type=float, help="Projected-gradient tolerance.")
@click.option("--target", type=float, help="Objective value that stops the multistart.")
@click.option("--recovery", type=click.Choice([m.value for m in RecoveryMode]), help="y -> x recovery mode.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Report file.")
@click.option("--format", "fmt", type=click.Choice([f.value for f in ReportFormat]), help="Report format.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="TOML file with [solver] and [experiment] tables.")
@click.option("--jobs", type=int, help="Instances solved in parallel.")
@click.option("--decompose/--no-decompose", default=None, help="Solve blocks of the 1-decomposition separately.")
@click.option("--quiet", is_flag=True, help="No progress bar.")
def solve(instances, formulations, starts, seed, max_iters, tol, target, recovery, out, fmt,
          config_path, jobs, decompose, quiet):
    """Run the formulations on every instance and print the summary table."""
    solver_values, experiment_values = _read_config(config_path)
    solver_values.update(_overrides(starts=starts, seed=seed, max_iterations=max_iters, gtol=tol, ftol=target))
    experiment_values.update(_overrides(
        formulations=list(formulations) or None, recovery=recovery, format=fmt, decompose=decompose, n_jobs=jobs,
    ))
    try:
        spec = ExperimentSpec(
            instances=list(instances),
            solver=SolverConfig(**solver_values),
            output=out,
            progress=not quiet,
            **experiment_values,
        )
    except ValidationError as exc:
        raise click.UsageError(str(exc)) from exc

    try:
        records = run_benchmark(spec)
    except CycleDGPError as exc:
        raise click.ClickException(str(exc)) from exc

    print_heading("MDE / LDE / CPU")
    print_table(summary_table(records), float_format="{:.3e}")
    failed = [r for r in records if r.status is RecordStatus.FAILED]
    for record in failed:
        click.echo("failed: {} / {}: {}".format(record.instance, record.formulation, record.message), err=True)
    if failed:
        sys.exit(1)


@main.command()
@click.option("--n", type=int, required=True, help="Vertex count.")
@click.option("--K", "K", type=int, default=3, show_default=True, help="Dimension.")
@click.option("--density", type=float, default=0.5, show_default=True, help="Edge probability.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--name", help="Instance name (default derived from the parameters).")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Output file (default stdout).")
def generate(n, K, density, seed, name, out):
    """Write a random YES instance with its ground-truth realization."""
    try:
        g = generate_instance(n, K, density, seed, name)
    except ValidationError as exc:
        raise click.UsageError(str(exc)) from exc
    if out is None:
        click.echo(format_instance(g), nl=False)
    else:
        write_instance(g, out)
        log.info("wrote %s (n=%d, m=%d)", out, g.n, g.m)


@main.command()
@click.option("--instance", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
def verify(instance):
    """Check the graph constructions on one instance."""
    try:
        g = read_instance(instance)
        checks = verify_instance(g)
    except CycleDGPError as exc:
        raise click.ClickException(str(exc)) from exc
    print_heading("{} (n={}, m={}, K={})".format(g.name, g.n, g.m, g.K))
    print_checks(checks)
    if not all(check.passed for check in checks):
        sys.exit(1)
