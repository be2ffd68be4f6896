"""Leaderboards, matching radar, error distributions and deployment statistics."""

from __future__ import annotations

import csv
import io
import json
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from . import charts
from .scoring import RESPONSE_TYPES, CaseResult, ResponseType
from .taskgen import TASKS, Level, TaskSpec

ALL = "all"
LEVELS = tuple(Level)


class AnalysisError(Exception):
    pass


class NonSequentialRun(AnalysisError):
    pass


class MissingCells(UserWarning):
    pass


class DegenerateTiming(UserWarning):
    pass


def percent(value: float) -> float:
    return round(value * 100, 1)


def fmt_percent(value: float | None) -> str:
    return "" if value is None else f"{value * 100:.1f}"


@dataclass
class ScoreMatrix:
    """Mean F1 per (system, column), stored in [0, 1].

    Columns are task ids followed by derived ``<domain>/<level>``, ``<domain>``
    and ``all`` averages; every derived cell weighs its tasks equally.
    """

    systems: list[str] = field(default_factory=list)
    columns: list[str] = field(default_factory=list)
    cells: dict[str, dict[str, float]] = field(default_factory=dict)
    task_columns: list[str] = field(default_factory=list)

    def get(self, system: str, column: str) -> float | None:
        return self.cells.get(system, {}).get(column)

    def percent(self, system: str, column: str) -> float | None:
        v = self.get(system, column)
        return None if v is None else percent(v)

    @property
    def empty(self) -> bool:
        return not self.systems

    @classmethod
    def from_cells(
        cls,
        cells: Mapping[str, Mapping[str, float]],
        tasks: Sequence[TaskSpec] | None = None,
        scale: float = 1.0,
    ) -> "ScoreMatrix":
        """Build from per-task cells; ``scale=100`` accepts percent inputs."""
        task_ids = {tid for row in cells.values() for tid in row}
        if tasks is None:
            tasks = [TASKS[t] for t in TASKS if t in task_ids]
        known = {t.task_id for t in tasks}
        unknown = task_ids - known
        if unknown:
            raise AnalysisError(f"unknown task ids {sorted(unknown)}")
        m = cls(systems=sorted(cells), task_columns=[t.task_id for t in tasks if t.task_id in task_ids])
        for system, row in cells.items():
            m.cells[system] = {tid: float(v) / scale for tid, v in row.items()}
        m._derive([t for t in tasks if t.task_id in task_ids])
        return m

    def _derive(self, tasks: Sequence[TaskSpec]) -> None:
        groups: dict[str, list[str]] = {}
        domains = []
        for t in tasks:
            if t.domain.value not in domains:
                domains.append(t.domain.value)
        for dom in domains:
            for lvl in LEVELS:
                ids = [t.task_id for t in tasks if t.domain.value == dom and t.level is lvl]
                if ids:
                    groups[f"{dom}/{lvl.value}"] = ids
        for dom in domains:
            groups[dom] = [t.task_id for t in tasks if t.domain.value == dom]
        if tasks:
            groups[ALL] = [t.task_id for t in tasks]
        self.columns = list(self.task_columns) + list(groups)
        missing = []
        for system in self.systems:
            row = self.cells.setdefault(system, {})
            missing += [(system, tid) for tid in self.task_columns if tid not in row]
            for name, ids in groups.items():
                vals = [row[i] for i in ids if i in row]
                if vals:
                    row[name] = sum(vals) / len(vals)
        if missing:
            warnings.warn(
                MissingCells(f"{len(missing)} (system, task) cells absent, excluded from averages: {missing[:5]}"),
                stacklevel=3,
            )


def aggregate(results: Iterable[CaseResult], tasks: Sequence[TaskSpec] | None = None) -> ScoreMatrix:
    sums: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in results:
        sums[r.system][r.task_id].append(r.f1)
    if not sums:
        return ScoreMatrix()
    if tasks is not None:
        known = {t.task_id for t in tasks}
        stray = {t for row in sums.values() for t in row} - known
        if stray:
            raise AnalysisError(f"results reference unknown tasks {sorted(stray)}")
    cells = {s: {t: sum(v) / len(v) for t, v in row.items()} for s, row in sums.items()}
    if tasks is not None:
        present = {t for row in cells.values() for t in row}
        tasks = [t for t in tasks if t.task_id in present]
    return ScoreMatrix.from_cells(cells, tasks)


@dataclass(frozen=True)
class RankEntry:
    system: str
    value: float
    rank: int


def rank(matrix: ScoreMatrix, column: str, ties: str = "dense") -> list[RankEntry]:
    """Order systems on ``column`` best first.

    ``dense`` gives tied values one shared rank (1, 1, 2, ...); ``ordinal``
    numbers rows 1..n. Either way ties are listed by ascending system id.
    """
    if ties not in ("dense", "ordinal"):
        raise ValueError("ties must be 'dense' or 'ordinal'")
    if column not in matrix.columns:
        raise AnalysisError(f"unknown column {column!r}")
    rows = [(s, matrix.get(s, column)) for s in matrix.systems]
    rows = sorted(((s, v) for s, v in rows if v is not None), key=lambda sv: (-sv[1], sv[0]))
    out = []
    current, prev = 0, None
    for i, (system, value) in enumerate(rows, start=1):
        if ties == "ordinal":
            current = i
        elif value != prev:
            current += 1
        prev = value
        out.append(RankEntry(system, value, current))
    return out


def leaderboards(matrix: ScoreMatrix, columns: Sequence[str] | None = None, ties: str = "dense") -> dict[str, list[RankEntry]]:
    return {c: rank(matrix, c, ties) for c in (columns or matrix.columns)}


def workflow_of(system: str) -> str:
    return system.split("+", 1)[0]


def radar_data(matrix: ScoreMatrix, workflow: str, axes: Sequence[str]) -> dict[str, dict[str, float]]:
    """Per-axis values divided by the best system of ``workflow`` on that axis."""
    systems = [s for s in matrix.systems if workflow_of(s) == workflow]
    if not systems:
        raise AnalysisError(f"no system uses workflow {workflow!r}")
    out: dict[str, dict[str, float]] = {s: {} for s in systems}
    for axis in axes:
        vals = {s: matrix.get(s, axis) or 0.0 for s in systems}
        top = max(vals.values())
        for s, v in vals.items():
            out[s][axis] = v / top if top > 0 else 0.0
    return out


Filter = Callable[[CaseResult], bool]


def error_distribution(results: Iterable[CaseResult], where: Filter | None = None) -> dict[ResponseType, float]:
    counts = dict.fromkeys(RESPONSE_TYPES, 0)
    n = 0
    for r in results:
        if where is None or where(r):
            counts[r.response_type] += 1
            n += 1
    if n == 0:
        raise AnalysisError("no results left after filtering")
    return {t: c / n for t, c in counts.items()}


@dataclass(frozen=True)
class DeploymentPoint:
    system: str
    mean_wall_time: float
    mean_f1: float
    n: int


def deployment_stats(
    results: Iterable[CaseResult],
    where: Filter | None = None,
    sequential: bool = True,
) -> list[DeploymentPoint]:
    """Mean seconds per query and mean F1 per system, as bubble-plot points.

    Only meaningful for runs timed one case at a time; pass ``sequential``
    from the run record.
    """
    if not sequential:
        raise NonSequentialRun("deployment statistics need a timing-mode run (parallelism 1)")
    groups: dict[str, list[CaseResult]] = defaultdict(list)
    for r in results:
        if where is None or where(r):
            groups[r.system].append(r)
    points = [
        DeploymentPoint(
            s,
            sum(r.wall_time for r in rs) / len(rs),
            sum(r.f1 for r in rs) / len(rs),
            len(rs),
        )
        for s, rs in sorted(groups.items())
    ]
    if points and all(p.mean_wall_time == 0 for p in points):
        warnings.warn(DegenerateTiming("every wall time is zero; timings carry no information"), stacklevel=2)
    return points


# -- report emission -----------------------------------------------------------


def matrix_csv(matrix: ScoreMatrix, rank_column: str = ALL) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", *matrix.columns, "rank"])
    ranks = {}
    if rank_column in matrix.columns:
        ranks = {e.system: e.rank for e in rank(matrix, rank_column, "ordinal")}
    order = sorted(matrix.systems, key=lambda s: (ranks.get(s, len(ranks) + 1), s))
    for s in order:
        w.writerow([s, *(fmt_percent(matrix.get(s, c)) for c in matrix.columns), ranks.get(s, "")])
    return buf.getvalue()


def read_matrix_csv(text: str) -> ScoreMatrix:
    """Parse a ``report.csv`` back; values come back at display precision."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise AnalysisError("empty report")
    header = rows[0]
    cols = header[1:-1]
    m = ScoreMatrix(columns=cols, task_columns=[c for c in cols if c in TASKS])
    for row in rows[1:]:
        m.systems.append(row[0])
        m.cells[row[0]] = {c: float(v) / 100 for c, v in zip(cols, row[1:-1]) if v != ""}
    m.systems.sort()
    return m


def distributions_csv(distributions: Mapping[str, Mapping[ResponseType, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", *(t.value for t in RESPONSE_TYPES)])
    for label in sorted(distributions):
        d = distributions[label]
        w.writerow([label, *(fmt_percent(d.get(t, 0.0)) for t in RESPONSE_TYPES)])
    return buf.getvalue()


def deployment_csv(points: Sequence[DeploymentPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", "n", "mean_wall_time_s", "mean_f1"])
    for p in points:
        w.writerow([p.system, p.n, f"{p.mean_wall_time:.3f}", fmt_percent(p.mean_f1)])
    return buf.getvalue()


def report_json(
    matrix: ScoreMatrix,
    boards: Mapping[str, list[RankEntry]],
    distributions: Mapping[str, Mapping[ResponseType, float]],
    deployment: Sequence[DeploymentPoint] | None,
) -> str:
    doc = {
        "columns": matrix.columns,
        "matrix": {s: {c: matrix.percent(s, c) for c in matrix.columns if matrix.get(s, c) is not None} for s in matrix.systems},
        "leaderboards": {c: [{"system": e.system, "value": percent(e.value), "rank": e.rank} for e in es] for c, es in boards.items()},
        "error_distributions": {k: {t.value: v for t, v in d.items()} for k, d in sorted(distributions.items())},
        "deployment": None
        if deployment is None
        else [{"system": p.system, "n": p.n, "mean_wall_time_s": round(p.mean_wall_time, 6), "mean_f1": percent(p.mean_f1)} for p in deployment],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def emit_report(
    out_dir: str | Path,
    matrix: ScoreMatrix,
    boards: Mapping[str, list[RankEntry]] | None = None,
    distributions: Mapping[str, Mapping[ResponseType, float]] | None = None,
    deployment: Sequence[DeploymentPoint] | None = None,
    formats: Sequence[str] = ("csv", "json", "svg"),
    radar_axes: Sequence[str] | None = None,
) -> list[Path]:
    """Write the report files and return their paths (sorted).

    ``deploy.*`` is written only when ``deployment`` is given.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    boards = boards if boards is not None else (leaderboards(matrix, [ALL]) if ALL in matrix.columns else {})
    distributions = distributions or {}
    written: list[Path] = []

    def put(name: str, text: str):
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    formats = {f.lower() for f in formats}
    if "csv" in formats:
        put("report.csv", matrix_csv(matrix))
        put("errors.csv", distributions_csv(distributions))
        if deployment is not None:
            put("deploy.csv", deployment_csv(deployment))
    if "json" in formats or "jsonreport" in formats:
        put("report.json", report_json(matrix, boards, distributions, deployment))
    if "svg" in formats:
        if ALL in boards:
            put("leaderboard.svg", charts.bar_chart("Overall average F1", [(e.system, percent(e.value)) for e in boards[ALL]]))
        axes = list(radar_axes or matrix.task_columns)
        for wf in sorted({workflow_of(s) for s in matrix.systems}):
            if axes:
                put(f"radar_{wf}.svg", charts.radar_chart(f"{wf} matching", axes, radar_data(matrix, wf, axes)))
        for label in sorted(distributions):
            d = distributions[label]
            put(f"errors_{_slug(label)}.svg", charts.pie_chart(label, [(t.value, percent(d.get(t, 0.0))) for t in RESPONSE_TYPES]))
        if deployment is not None:
            put("deploy.svg", charts.bubble_chart("Deployment", [(p.system, p.mean_wall_time, percent(p.mean_f1), p.n) for p in deployment]))
    return sorted(written)


def _slug(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in label)
