"""Helper Functions for per-sample attack records, aggregates and comparison tables."""

import json
import math
import numpy as np
from loguru import logger
from pathlib import Path
from pydantic import BaseModel, Field
from typing import Iterable, List, Literal, Optional


SAMPLES_FILE = 'samples.records'
SUMMARY_FILE = 'aggregate.summary'
TIMINGS_FILE = 'timings.records'
CONFIG_FILE = 'config.echo'

AttackMode = Literal['local', 'global']


class IncompatibleReportsError(ValueError):
    """Raised when runs attacked different victim models and cannot be compared."""


class SampleRecord(BaseModel):
    """Outcome of one sample of an attack run.

    ``status`` is ``ok`` for an attacked sample, ``skipped`` for a cloud the
    model already misclassifies and ``error`` when the attack raised.
    """

    sample_index: int = Field(ge=0)
    cloud_id: str
    true_class: int
    status: Literal['ok', 'skipped', 'error']
    success: Optional[bool] = None
    adversarial_class: Optional[int] = None
    chamfer: Optional[float] = None
    hausdorff: Optional[float] = None
    points_modified: Optional[int] = None
    masked_points: Optional[int] = None
    lambda1: Optional[float] = None
    attacked_regions: List[int] = Field(default_factory=list)
    message: Optional[str] = None


class TimingRecord(BaseModel):
    """Wall time of one sample, kept apart from the reproducible records."""

    sample_index: int
    cloud_id: str
    seconds: float


class AggregateSummary(BaseModel):
    """Run-level metrics; a pure function of the sample records.

    Distances and point counts are means over successful samples.
    """

    mode: AttackMode
    model_hash: str
    samples: int
    attacked: int
    skipped: int
    errors: int
    successes: int
    success_rate: float = Field(ge=0, le=1)
    mean_chamfer: Optional[float] = None
    median_chamfer: Optional[float] = None
    mean_hausdorff: Optional[float] = None
    median_hausdorff: Optional[float] = None
    mean_points_modified: Optional[float] = None
    mean_masked_points: Optional[float] = None


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def _median(values: List[float]) -> Optional[float]:
    return float(np.median(values)) if values else None


def aggregate(
    records: Iterable[SampleRecord], mode: AttackMode, model_hash: str
) -> AggregateSummary:
    """Summarise sample records.

    Args:
        records (Iterable[SampleRecord]): Rows of one run.
        mode (AttackMode): ``local`` or ``global``.
        model_hash (str): Content hash of the victim model.

    Returns:
        AggregateSummary: Success rate over attacked (correctly classified)
        samples and distance statistics over the successful ones.
    """
    rows = list(records)
    attacked = [row for row in rows if row.status == 'ok']
    successful = [row for row in attacked if row.success]
    chamfer = [float(row.chamfer) for row in successful if row.chamfer is not None]
    hausdorff = [float(row.hausdorff) for row in successful if row.hausdorff is not None]
    return AggregateSummary(
        mode=mode,
        model_hash=model_hash,
        samples=len(rows),
        attacked=len(attacked),
        skipped=sum(row.status == 'skipped' for row in rows),
        errors=sum(row.status == 'error' for row in rows),
        successes=len(successful),
        success_rate=len(successful) / len(attacked) if attacked else 0.0,
        mean_chamfer=_mean(chamfer),
        median_chamfer=_median(chamfer),
        mean_hausdorff=_mean(hausdorff),
        median_hausdorff=_median(hausdorff),
        mean_points_modified=_mean([float(row.points_modified or 0) for row in successful]),
        mean_masked_points=_mean([float(row.masked_points or 0) for row in attacked]),
    )


def dump_line(model: BaseModel) -> str:
    """One sorted-key JSON line for a record."""
    return json.dumps(model.model_dump(mode='json'), sort_keys=True) + '\n'


def append_record(path: Path, record: BaseModel) -> None:
    """Append one record and flush it so a crash loses at most the line in progress."""
    with open(path, 'a') as handle:
        handle.write(dump_line(record))
        handle.flush()


def read_records(path: Path) -> List[SampleRecord]:
    """Read sample records, dropping a trailing partial line left by an interrupted run."""
    if not path.exists():
        return []
    records = []
    lines = path.read_text().split('\n')
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(SampleRecord.model_validate_json(line))
        except ValueError:
            if number == len(lines):
                logger.warning(f'{path}: dropping incomplete last record')
                break
            raise
    return records


def write_records(path: Path, records: Iterable[BaseModel]) -> None:
    """Rewrite a records file from scratch."""
    path.write_text(''.join(dump_line(record) for record in records))


def write_summary(path: Path, summary: AggregateSummary) -> None:
    """Write an aggregate as indented sorted-key JSON."""
    path.write_text(json.dumps(summary.model_dump(mode='json'), indent=2, sort_keys=True) + '\n')


def read_summary(path: Path) -> AggregateSummary:
    """Load an aggregate written by write_summary."""
    return AggregateSummary.model_validate_json(path.read_text())


class RunArtifacts(BaseModel):
    """Records and summary of one attack output directory."""

    name: str
    summary: AggregateSummary
    records: List[SampleRecord]


def load_run(run_dir: str | Path) -> RunArtifacts:
    """Load an attack run and check that its summary matches its rows."""
    run_dir = Path(run_dir)
    for required in (SAMPLES_FILE, SUMMARY_FILE):
        if not (run_dir / required).exists():
            raise FileNotFoundError(f'{run_dir} is not a finished attack run: {required} missing')
    summary = read_summary(run_dir / SUMMARY_FILE)
    records = read_records(run_dir / SAMPLES_FILE)
    check_consistency(summary, records)
    return RunArtifacts(name=run_dir.name, summary=summary, records=records)


def _close(first: Optional[float], second: Optional[float], tolerance: float) -> bool:
    if first is None or second is None:
        return first is second
    return math.isclose(first, second, rel_tol=0.0, abs_tol=tolerance)


def check_consistency(
    summary: AggregateSummary, records: List[SampleRecord], tolerance: float = 1e-12
) -> None:
    """Raise ValueError unless the summary is recomputable from the records."""
    recomputed = aggregate(records, summary.mode, summary.model_hash)
    for name, value in summary.model_dump().items():
        other = getattr(recomputed, name)
        if isinstance(value, float) or isinstance(other, float):
            agrees = _close(value, other, tolerance)
        else:
            agrees = value == other
        if not agrees:
            raise ValueError(f'Aggregate {name}={value} disagrees with its records ({other}).')


class ReportRow(BaseModel):
    """One method row of the comparison table."""

    run: str
    mode: AttackMode
    attacked: int
    success_rate: float
    mean_chamfer: Optional[float]
    mean_hausdorff: Optional[float]
    mean_points_modified: Optional[float]


class ComparisonReport(BaseModel):
    """Runs against one victim, compared side by side."""

    model_hash: str
    rows: List[ReportRow]


def compare_runs(runs: List[RunArtifacts]) -> ComparisonReport:
    """Merge runs into one report; they must share the victim model."""
    if not runs:
        raise ValueError('Nothing to report: no runs given.')
    hashes = {run.summary.model_hash for run in runs}
    if len(hashes) != 1:
        raise IncompatibleReportsError(
            f'Runs attacked different models ({", ".join(sorted(hashes))}); refusing to compare.'
        )
    rows = [
        ReportRow(
            run=run.name,
            mode=run.summary.mode,
            attacked=run.summary.attacked,
            success_rate=run.summary.success_rate,
            mean_chamfer=run.summary.mean_chamfer,
            mean_hausdorff=run.summary.mean_hausdorff,
            mean_points_modified=run.summary.mean_points_modified,
        )
        for run in runs
    ]
    return ComparisonReport(model_hash=hashes.pop(), rows=rows)


def _cell(value: Optional[float], spec: str) -> str:
    return '-' if value is None else format(value, spec)


def render_table(report: ComparisonReport) -> str:
    """Aligned text table, one row per run."""
    header = [
        'Method',
        'Mode',
        'N',
        'Success Rate (%) ↑',
        'Chamfer ↓',
        'Hausdorff ↓',
        '# Points ↓',
    ]
    body = [
        [
            row.run,
            row.mode,
            str(row.attacked),
            f'{100 * row.success_rate:.2f}',
            _cell(row.mean_chamfer, '.3e'),
            _cell(row.mean_hausdorff, '.3e'),
            _cell(row.mean_points_modified, '.1f'),
        ]
        for row in report.rows
    ]
    widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
    lines = [
        f'# victim model sha256 {report.model_hash}',
        '# ↑ higher is better, ↓ lower is better',
        '# distances and # points are means over successful samples',
        '  '.join(cell.ljust(width) for cell, width in zip(header, widths)).rstrip(),
        '  '.join('-' * width for width in widths),
    ]
    lines += ['  '.join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in body]
    return '\n'.join(lines) + '\n'
