"""
Command-line entry point: `python -m app.cli <command>`.

Exit codes: 0 ok, 2 configuration error, 3 verification failure,
4 replicate-failure budget exceeded.
"""

import json
import math
import sys
from pathlib import Path
from typing import Dict, List, Optional

import click
from pydantic import ValidationError

from app.config import settings
from app.schemas.experiment import ExperimentConfig
from app.schemas.field import Interval
from app.services.critical_points import (
    crit_summary,
    critical_points_to_csv,
    find_critical_points,
)
from app.services.experiment import (
    correlation_summary,
    load_result,
    parse_pairs,
    report_text,
    run_experiment,
)
from app.services.sphere_field import sample_field
from app.services.verification import SUITES, TOLERANCE_MEANING, run_suite
from app.utils.errors import (
    ConfigError,
    DegenerateSample,
    LabError,
    ReplicateBudgetExceeded,
)
from app.utils.logging_config import configure_logging, get_logger

logger = get_logger(__name__)

EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_BUDGET = 4


def _bound(text: str) -> Optional[float]:
    text = text.strip().lower()
    if text in ("inf", "+inf", "-inf", ""):
        return None
    value = float(text)
    if math.isinf(value):
        return None
    return value


def parse_intervals(text: str) -> List[Interval]:
    """"1,inf;0.5,inf" -> [Interval(lo=1), Interval(lo=0.5)]."""
    intervals = []
    for item in text.split(";"):
        if not item.strip():
            continue
        parts = item.split(",")
        if len(parts) != 2:
            raise ConfigError(f"interval {item!r} is not of the form lo,hi")
        intervals.append(Interval(lo=_bound(parts[0]), hi=_bound(parts[1])))
    return intervals


def parse_floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parse_tolerances(values) -> Dict[str, float]:
    """("sigma=1e-10", "integrals=0.2") -> {"sigma": 1e-10, "integrals": 0.2}."""
    tolerances = {}
    for item in values:
        name, sep, text = item.partition("=")
        name = name.strip()
        if not sep or name not in SUITES:
            raise ConfigError(f"tolerance {item!r} is not of the form SUITE=VALUE")
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"tolerance {item!r} is not a number")
        if not value > 0.0:
            raise ConfigError(f"tolerance {item!r} must be positive")
        tolerances[name] = value
    return tolerances


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.option("--log-level", default=None, help="Overrides HC_LOG_LEVEL.")
def cli(log_level):
    """Critical points of random spherical harmonics: simulation and checks."""
    configure_logging(log_level)


@cli.command()
@click.option("--ell", "ells", multiple=True, type=int, help="Degree; repeat for several.")
@click.option("--replicates", type=int, default=None)
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.option("--grid-factor", type=int, default=None)
@click.option("--intervals", default=None, help='e.g. "1,inf;0.5,inf"')
@click.option("--thresholds", default=None, help='e.g. "0,1"')
@click.option("--stats", default=None, help="crit,h2,h3,h4,nodal,area,euler")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--workers", type=int, default=None, help="Overrides HC_THREADS.")
@click.option("--resume", is_flag=True, help="Skip replicates already in the journal.")
def simulate(ells, replicates, seed, out, grid_factor, intervals, thresholds, stats, config_file, workers, resume):
    """Run a seeded replicate experiment and write rows.csv and summary.json."""
    try:
        data = json.loads(Path(config_file).read_text()) if config_file else {}
        if ells:
            data["ells"] = list(ells)
        if replicates is not None:
            data["replicates"] = replicates
        if seed is not None:
            data["master_seed"] = seed
        if out is not None:
            data["out"] = out
        if grid_factor is not None:
            data["grid_factor"] = grid_factor
        if intervals is not None:
            data["intervals"] = [iv.model_dump() for iv in parse_intervals(intervals)]
        if thresholds is not None:
            data["thresholds"] = parse_floats(thresholds)
        if stats is not None:
            data["stats"] = [s.strip() for s in stats.split(",") if s.strip()]
        data.setdefault("grid_factor", settings.HC_GRID_FACTOR)
        config = ExperimentConfig(**data)
    except (ValidationError, ValueError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, str(exc))

    try:
        result = run_experiment(config, workers=workers, resume=resume)
    except ReplicateBudgetExceeded as exc:
        _fail(EXIT_BUDGET, str(exc))
    click.echo(f"{len(result.rows)} rows written to {config.out or '(memory)'}")
    for degree in result.summary.degrees:
        for row in degree.correlations:
            click.echo(f"ell={row.ell} rho({row.x},{row.y}) = {row.rho:+.4f}")


@cli.command()
@click.option("--ell", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--grid-factor", type=int, default=None)
@click.option("--dump", type=click.Choice(["csv", "json"]), default=None)
def critpoints(ell, seed, grid_factor, dump):
    """List the critical points of one field."""
    try:
        field = sample_field(ell, seed)
        points = find_critical_points(field, grid_factor)
    except ValueError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except LabError as exc:
        _fail(EXIT_VERIFY, str(exc))
    if dump == "csv":
        critical_points_to_csv(points, stream=click.get_text_stream("stdout"))
        return
    if dump == "json":
        click.echo(json.dumps([p.model_dump(mode="json") for p in points], indent=2))
        return
    summary = crit_summary(points)
    click.echo(
        f"ell={ell} seed={seed}: {summary.total} critical points "
        f"({summary.n_min} minima, {summary.n_saddle} saddles, {summary.n_max} maxima)"
    )


@cli.command()
@click.argument("suites", nargs=-1, type=click.Choice(sorted(SUITES)))
@click.option("--mc-samples", type=int, default=None)
@click.option(
    "--tol",
    "tolerances",
    multiple=True,
    metavar="SUITE=VALUE",
    help="Tolerance override for one suite, repeatable. "
    + "; ".join(f"{name}: {meaning}" for name, meaning in sorted(TOLERANCE_MEANING.items())),
)
def verify(suites, mc_samples, tolerances):
    """Run closed-form identity suites and print a pass/fail table."""
    try:
        tol = parse_tolerances(tolerances)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    failed = False
    for name in suites or sorted(SUITES):
        try:
            report = run_suite(name, mc_samples=mc_samples, tol=tol.get(name))
        except LabError as exc:
            click.echo(f"{name}: error: {exc}", err=True)
            failed = True
            continue
        for check in report.checks:
            mark = "PASS" if check.passed else "FAIL"
            click.echo(
                f"{mark}  {name:<10} {check.name:<45} expected={check.expected:.10g} "
                f"observed={check.observed:.10g} tol={check.tolerance:.3g}"
            )
        failed = failed or not report.passed
    if failed:
        sys.exit(EXIT_VERIFY)


@cli.command()
@click.option("--in", "directory", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--pairs", default="ncrit:A,ncrit:h4,ncrit:nodal")
def correlate(directory, pairs):
    """Correlation table with jackknife standard errors."""
    try:
        result = load_result(directory)
        rows = correlation_summary(result.rows, parse_pairs(pairs))
    except (DegenerateSample, ValueError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo("ell,x,y,rho,rho2,stderr")
    for row in rows:
        stderr = "" if row.stderr is None else repr(row.stderr)
        click.echo(f"{row.ell},{row.x},{row.y},{row.rho!r},{row.rho2!r},{stderr}")


@cli.command()
@click.option("--in", "directory", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def report(directory, fmt):
    """Long-format samples and theory predictions for plotting elsewhere."""
    try:
        result = load_result(directory)
    except (ValueError, FileNotFoundError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(report_text(result, fmt), nl=False)


if __name__ == "__main__":
    cli()
