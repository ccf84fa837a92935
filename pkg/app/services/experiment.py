"""
Experiment service layer.
Seeded replicate runs, the crash-recovery journal, CSV/JSON outputs and the
summaries recomputed from them.
"""

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.config import settings
from app.schemas.experiment import (
    ColumnSummary,
    CorrelationRow,
    DegreeSummary,
    ExperimentConfig,
    ExperimentResult,
    ExperimentSummary,
)
from app.services import statistics
from app.services.critical_points import (
    crit_summary,
    euler_characteristic,
    locate_critical_points,
)
from app.services.level_sets import excursion_area, level_length
from app.services.polyspectra import build_grid, field_on_grid, sample_polyspectrum
from app.services.rng import replicate_seed
from app.services.sphere_field import sample_field
from app.services.theory import (
    expected_crit_in_interval,
    expected_lkc,
    predicted_moments,
    trispectrum_proxy,
)
from app.utils.errors import (
    DegenerateCritical,
    DegenerateSample,
    IncompleteMorse,
    LabError,
    ReplicateBudgetExceeded,
)
from app.utils.logging_config import get_logger

logger = get_logger(__name__)

ROWS_FILE = "rows.csv"
SUMMARY_FILE = "summary.json"
JOURNAL_FILE = "journal.jsonl"

Row = Dict[str, Union[int, float]]

_INT_PREFIXES = ("n_", "euler_")
_INT_COLUMNS = ("ell", "replicate", "seed")

# short names accepted in pair lists
PAIR_ALIASES = {"ncrit": "n_crit", "nodal": "nodal_len", "A": "A_ell"}


# Single replicate


def _locate_with_retry(field, grid_factor: int):
    try:
        return locate_critical_points(field, grid_factor)
    except (IncompleteMorse, DegenerateCritical) as exc:
        logger.warning(
            "ell=%d seed=%d: %s; retrying with grid factor %d",
            field.ell,
            field.seed,
            exc,
            2 * grid_factor,
        )
        return locate_critical_points(field, 2 * grid_factor)


def replicate_row(config: ExperimentConfig, ell: int, replicate: int) -> Row:
    """
    All toggled statistics of replicate r at degree ell.

    Statistics share one field synthesis per grid. Critical point geometry is
    retried once with the grid factor doubled before the error propagates.
    """
    seed = replicate_seed(config.master_seed, ell, replicate)
    field = sample_field(ell, seed)
    row: Row = {"ell": ell, "replicate": replicate, "seed": seed}

    points = None
    if config.wants("crit"):
        points = _locate_with_retry(field, config.grid_factor)
        summary = crit_summary(points, config.intervals)
        row.update(
            n_crit=summary.total,
            n_min=summary.n_min,
            n_saddle=summary.n_saddle,
            n_max=summary.n_max,
        )
        for i, count in enumerate(summary.interval_counts):
            row[f"n_crit_I{i + 1}"] = count

    orders = [q for q in (2, 3, 4) if config.wants(f"h{q}")]
    want_area = config.wants("area") and config.thresholds
    if orders or want_area:
        qmax = max(max(orders, default=2), settings.HC_AREA_QMAX if want_area else 2)
        grid = build_grid(ell, qmax)
        values = field_on_grid(field, grid)
        for q in orders:
            row[f"h{q}"] = sample_polyspectrum(field, q, grid, values)
        if config.wants("h4"):
            row["A_ell"] = trispectrum_proxy(row["h4"], ell)
    if config.wants("nodal"):
        row["nodal_len"] = level_length(field, 0.0)
    if want_area:
        for i, u in enumerate(config.thresholds):
            row[f"area_u{i + 1}"] = excursion_area(field, u, grid, values)
    if points is not None and config.wants("euler"):
        for i, u in enumerate(config.thresholds):
            row[f"euler_u{i + 1}"] = euler_characteristic(points, u)
    return row


def _run_task(task: Tuple[ExperimentConfig, int, int]):
    config, ell, replicate = task
    try:
        return ell, replicate, replicate_row(config, ell, replicate), None
    except LabError as exc:
        return ell, replicate, None, str(exc)


# Journal and files


def _read_journal(path: Path) -> Dict[Tuple[int, int], dict]:
    done: Dict[Tuple[int, int], dict] = {}
    if not path.exists():
        return done
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        entry = json.loads(line)
        done[(entry["ell"], entry["replicate"])] = entry
    return done


def write_rows_csv(columns: Sequence[str], rows: Iterable[Row], handle) -> None:
    """Rows with floats written by repr so they read back bit-exactly."""
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in columns])


def _parse(column: str, text: str) -> Union[int, float]:
    if column in _INT_COLUMNS or column.startswith(_INT_PREFIXES):
        return int(text)
    return float(text)


def read_rows_csv(path: Union[str, Path]) -> Tuple[List[str], List[Row]]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        columns = next(reader)
        rows = [{c: _parse(c, v) for c, v in zip(columns, record)} for record in reader]
    return columns, rows


def rows_to_csv_text(columns: Sequence[str], rows: Iterable[Row]) -> str:
    buffer = io.StringIO()
    write_rows_csv(columns, rows, buffer)
    return buffer.getvalue()


# Summaries


def resolve_column(name: str, columns: Sequence[str]) -> str:
    """Map a pair-list name (ncrit, nodal, A, ncrit_I1, ...) to a column."""
    name = PAIR_ALIASES.get(name, name)
    if name.startswith("ncrit_"):
        name = "n_crit_" + name[len("ncrit_"):]
    if name not in columns:
        raise DegenerateSample(f"no column named {name}")
    return name


def parse_pairs(text: str) -> List[Tuple[str, str]]:
    """"ncrit:h4,ncrit:nodal" -> [("ncrit", "h4"), ("ncrit", "nodal")]."""
    pairs = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        left, sep, right = item.partition(":")
        if not sep:
            raise ValueError(f"pair {item!r} is not of the form x:y")
        pairs.append((left.strip(), right.strip()))
    return pairs


def correlation_summary(
    rows: Sequence[Row], pairs: Sequence[Tuple[str, str]]
) -> List[CorrelationRow]:
    """
    Pearson correlation, its square and jackknife standard error per degree
    and pair, over replicates.

    Raises:
        DegenerateSample: If a column is constant at some degree or missing
    """
    if not rows:
        return []
    columns = list(rows[0].keys())
    resolved = [(resolve_column(x, columns), resolve_column(y, columns)) for x, y in pairs]
    out = []
    for ell in sorted({int(r["ell"]) for r in rows}):
        subset = [r for r in rows if r["ell"] == ell]
        for x, y in resolved:
            stats = statistics.correlation([r[x] for r in subset], [r[y] for r in subset])
            stderr = None if math.isnan(stats["stderr"]) else stats["stderr"]
            out.append(
                CorrelationRow(
                    ell=ell, x=x, y=y, rho=stats["rho"], rho2=stats["rho2"], stderr=stderr
                )
            )
    return out


def default_pairs(columns: Sequence[str]) -> List[Tuple[str, str]]:
    candidates = [
        ("n_crit", "A_ell"),
        ("n_crit", "h4"),
        ("n_crit", "nodal_len"),
        ("nodal_len", "A_ell"),
        ("h4", "A_ell"),
    ]
    candidates += [(c, "h2") for c in columns if c.startswith("n_crit_I")]
    return [(x, y) for x, y in candidates if x in columns and y in columns]


def _column_summary(values: np.ndarray) -> ColumnSummary:
    variance = float(np.var(values, ddof=1)) if values.size > 1 else 0.0
    skew = kurt = None
    if values.size > 2 and np.ptp(values) > 0.0:
        shape = statistics.shape_moments(values)
        skew, kurt = shape["skewness"], shape["kurtosis"]
    return ColumnSummary(
        mean=float(np.mean(values)), variance=variance, skewness=skew, kurtosis=kurt
    )


def summarize(
    config: ExperimentConfig,
    columns: Sequence[str],
    rows: Sequence[Row],
    failed: Sequence[Dict[str, int]] = (),
) -> ExperimentSummary:
    """Per-degree moments, default correlations and the KS statistic of n_crit."""
    stat_columns = [c for c in columns if c not in _INT_COLUMNS]
    degrees = []
    for ell in sorted({int(r["ell"]) for r in rows}):
        subset = [r for r in rows if r["ell"] == ell]
        col_stats = {
            c: _column_summary(np.array([r[c] for r in subset], dtype=float))
            for c in stat_columns
        }
        correlations = []
        for x, y in default_pairs(columns):
            try:
                correlations.extend(correlation_summary(subset, [(x, y)]))
            except DegenerateSample as exc:
                logger.warning("ell=%d: skipping correlation %s/%s: %s", ell, x, y, exc)
        ks = None
        if "n_crit" in columns:
            try:
                ks = statistics.clt_check([r["n_crit"] for r in subset])["ks_stat"]
            except DegenerateSample:
                logger.warning("ell=%d: n_crit is constant, no KS statistic", ell)
        degrees.append(
            DegreeSummary(
                ell=ell,
                n=len(subset),
                columns=col_stats,
                correlations=correlations,
                ks_stat_n_crit=ks,
            )
        )
    return ExperimentSummary(config=config, degrees=degrees, failed=list(failed))


# Runner


def run_experiment(
    config: ExperimentConfig, workers: Optional[int] = None, resume: bool = False
) -> ExperimentResult:
    """
    Run every (ell, replicate) of a config and write its outputs.

    Replicates go through a process pool and are journalled in (ell, r)
    order as they complete; with resume=True journalled replicates are not
    recomputed. Outputs are identical for any worker count.

    Raises:
        ReplicateBudgetExceeded: If more than HC_FAILURE_BUDGET of the
            replicates fail after their retry
    """
    workers = workers or settings.worker_count
    out = Path(config.out) if config.out else None
    journal_path = out / JOURNAL_FILE if out else None
    done: Dict[Tuple[int, int], dict] = {}
    if out:
        out.mkdir(parents=True, exist_ok=True)
        if resume:
            done = _read_journal(journal_path)
            logger.info("resuming with %d journalled replicates", len(done))
        elif journal_path.exists():
            journal_path.unlink()

    tasks = [
        (config, ell, r)
        for ell in config.ells
        for r in range(config.replicates)
        if (ell, r) not in done
    ]
    logger.info(
        "experiment: %d degrees x %d replicates, %d to run on %d workers",
        len(config.ells),
        config.replicates,
        len(tasks),
        workers,
    )

    journal = open(journal_path, "a") if journal_path else None
    try:
        if workers == 1 or len(tasks) <= 1:
            results = map(_run_task, tasks)
            pool = None
        else:
            pool = ProcessPoolExecutor(max_workers=workers)
            results = pool.map(_run_task, tasks)
        for ell, r, row, error in results:
            entry = {"ell": ell, "replicate": r}
            if error is None:
                entry["row"] = row
            else:
                logger.warning("ell=%d replicate=%d failed: %s", ell, r, error)
                entry["error"] = error
            done[(ell, r)] = entry
            if journal:
                journal.write(json.dumps(entry) + "\n")
                journal.flush()
        if pool:
            pool.shutdown()
    finally:
        if journal:
            journal.close()

    keys = sorted(done)
    failed = [{"ell": k[0], "replicate": k[1]} for k in keys if "row" not in done[k]]
    total = len(config.ells) * config.replicates
    if len(failed) > settings.HC_FAILURE_BUDGET * total:
        raise ReplicateBudgetExceeded(len(failed), total, settings.HC_FAILURE_BUDGET)

    columns = config.columns()
    rows = [done[k]["row"] for k in keys if "row" in done[k]]
    summary = summarize(config, columns, rows, failed)
    if out:
        (out / ROWS_FILE).write_text(rows_to_csv_text(columns, rows))
        (out / SUMMARY_FILE).write_text(summary.model_dump_json(indent=2))
        logger.info("wrote %d rows to %s", len(rows), out)
    return ExperimentResult(columns=columns, rows=rows, summary=summary)


def load_result(directory: Union[str, Path]) -> ExperimentResult:
    """Rows from the CSV and the config from the summary of a finished run."""
    directory = Path(directory)
    columns, rows = read_rows_csv(directory / ROWS_FILE)
    stored = ExperimentSummary.model_validate_json((directory / SUMMARY_FILE).read_text())
    return ExperimentResult(columns=columns, rows=rows, summary=stored)


# Report


def report_records(result: ExperimentResult) -> List[dict]:
    """Long-format samples followed by the theory predictions per degree."""
    config = result.summary.config
    records = []
    for row in result.rows:
        for c in result.columns:
            if c in _INT_COLUMNS:
                continue
            records.append(
                {
                    "kind": "sample",
                    "ell": row["ell"],
                    "column": c,
                    "replicate": row["replicate"],
                    "value": float(row[c]),
                }
            )
    for ell in sorted({int(r["ell"]) for r in result.rows}):
        moments = predicted_moments(ell)
        predictions = {
            "mean_crit": moments.mean_crit,
            "var_crit_leading": moments.var_crit_leading,
            "nodal_len": expected_lkc(0.0, ell).level_length,
        }
        for i, interval in enumerate(config.intervals):
            predictions[f"n_crit_I{i + 1}"] = expected_crit_in_interval(interval, ell)
        for i, u in enumerate(config.thresholds):
            lkc = expected_lkc(u, ell)
            predictions[f"area_u{i + 1}"] = lkc.area
            predictions[f"euler_u{i + 1}"] = lkc.euler
        for name, value in predictions.items():
            records.append(
                {"kind": "prediction", "ell": ell, "column": name, "replicate": None, "value": value}
            )
    return records


def report_text(result: ExperimentResult, fmt: str = "csv") -> str:
    records = report_records(result)
    if fmt == "json":
        return json.dumps(records, indent=2)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["kind", "ell", "column", "replicate", "value"])
    for rec in records:
        writer.writerow(
            [
                rec["kind"],
                rec["ell"],
                rec["column"],
                "" if rec["replicate"] is None else rec["replicate"],
                repr(rec["value"]),
            ]
        )
    return buffer.getvalue()
