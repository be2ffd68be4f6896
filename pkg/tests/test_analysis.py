import random
import warnings

import pytest
from hypothesis import given, strategies as st
from reference import COLUMNS, column_matrix, load_reference, printed_order

from ragharness.analysis import (
    AnalysisError,
    DegenerateTiming,
    MissingCells,
    NonSequentialRun,
    ScoreMatrix,
    aggregate,
    deployment_stats,
    distributions_csv,
    emit_report,
    error_distribution,
    matrix_csv,
    radar_data,
    rank,
    read_matrix_csv,
)
from ragharness.charts import pie_chart
from ragharness.scoring import CaseResult, ResponseType
from ragharness.taskgen import TASKS

T = ResponseType


def result(system="ReAct+gpt-4-1106", task="1-3", f1=1.0, rtype=T.EM, case="c", wall=0.0):
    return CaseResult(case, task, system, f1, rtype, wall)


def mix(counts):
    out = []
    for rtype, n in counts.items():
        out += [result(rtype=rtype, case=f"{rtype.value}{i}") for i in range(n)]
    return out


PAL_MIX = {T.TE: 494, T.AM: 271, T.EM: 165, T.GE: 30, T.RE: 25, T.ME: 15}


@pytest.mark.parametrize("column", COLUMNS)
def test_reference_ordering(column):
    rows = load_reference()
    board = rank(column_matrix(rows, column), column, ties="ordinal")
    assert [e.system for e in board] == printed_order(rows, column)
    assert [e.rank for e in board] == list(range(1, 22))


def test_dense_ties_share_rank():
    m = ScoreMatrix(systems=["a", "b", "c"], columns=["x"], cells={"a": {"x": 0.5}, "b": {"x": 0.5}, "c": {"x": 0.1}})
    assert [(e.system, e.rank) for e in rank(m, "x")] == [("a", 1), ("b", 1), ("c", 2)]
    assert [e.rank for e in rank(m, "x", ties="ordinal")] == [1, 2, 3]
    with pytest.raises(AnalysisError):
        rank(m, "nope")


@given(st.lists(st.floats(0, 1), min_size=1, max_size=12))
def test_rank_value_consistency(values):
    cells = {f"s{i}": {"x": v} for i, v in enumerate(values)}
    board = rank(ScoreMatrix(systems=sorted(cells), columns=["x"], cells=cells), "x")
    for a, b in zip(board, board[1:]):
        assert a.value >= b.value
        assert (a.rank < b.rank) == (a.value > b.value)


def test_average_reconstruction():
    m = ScoreMatrix.from_cells({"ReAct+gpt-4-1106": {"1-3": 89.7, "2-4": 46.7, "3-5": 57.7}}, scale=100)
    assert abs(m.percent("ReAct+gpt-4-1106", "aminer") - 64.7) <= 0.05
    assert m.columns == ["1-3", "2-4", "3-5", "aminer/KS", "aminer/KU", "aminer/KA", "aminer", "all"]


def test_reference_derived_columns():
    for row in load_reference():
        cells = {row["system"]: {t: float(row[t]) for t in ("1-3", "2-4", "3-5")}}
        m = ScoreMatrix.from_cells(cells, scale=100)
        # inputs and output are both rounded to one decimal
        assert abs(m.percent(row["system"], "aminer") - float(row["aminer"])) <= 0.1 + 1e-9


def test_aggregate_means_and_linearity():
    rs = [result(f1=1.0, case="a"), result(f1=0.0, case="b")]
    m = aggregate(rs)
    assert m.percent("ReAct+gpt-4-1106", "1-3") == 50.0
    assert aggregate(rs + rs).cells == m.cells
    assert aggregate([]).empty


def test_missing_cells_warn():
    rs = [result(system="a", task="1-3"), result(system="b", task="3-5")]
    with pytest.warns(MissingCells):
        m = aggregate(rs)
    assert m.get("a", "aminer") == 1.0
    with pytest.raises(AnalysisError):
        aggregate([result(task="9-9")], list(TASKS.values()))


def test_radar():
    m = ScoreMatrix.from_cells({"PAL+a": {"1-3": 40}, "PAL+b": {"1-3": 20}, "PAL+c": {"1-3": 0}, "FC+x": {"1-3": 90}}, scale=100)
    assert radar_data(m, "PAL", ["1-3"]) == {"PAL+a": {"1-3": 1.0}, "PAL+b": {"1-3": 0.5}, "PAL+c": {"1-3": 0.0}}
    zero = ScoreMatrix.from_cells({"PAL+a": {"1-3": 0}}, scale=100)
    assert radar_data(zero, "PAL", ["1-3"]) == {"PAL+a": {"1-3": 0.0}}
    with pytest.raises(AnalysisError):
        radar_data(m, "DFSDT", ["1-3"])


def test_radar_preserves_order_on_reference():
    rows = load_reference()
    cells = {r["system"]: {t: float(r[t]) for t in ("1-3", "2-4", "3-5")} for r in rows}
    m = ScoreMatrix.from_cells(cells, scale=100)
    for wf in ("ReAct", "PAL", "DFSDT", "FC"):
        radar = radar_data(m, wf, ["1-3", "2-4", "3-5"])
        for axis in ("1-3", "2-4", "3-5"):
            raw = sorted(radar, key=lambda s: (m.get(s, axis), s))
            norm = sorted(radar, key=lambda s: (radar[s][axis], s))
            assert raw == norm
            best = max(radar, key=lambda s: m.get(s, axis))
            assert radar[best][axis] == 1.0 or m.get(best, axis) == 0


def test_error_distribution_mix():
    d = error_distribution(mix(PAL_MIX))
    assert abs(d[T.TE] * 100 - 49.4) <= 0.05
    assert abs(d[T.AM] * 100 - 27.1) <= 0.05
    assert abs(d[T.EM] * 100 - 16.5) <= 0.05
    assert abs(sum(d.values()) - 1) <= 1e-9
    shuffled = mix(PAL_MIX)
    random.Random(0).shuffle(shuffled)
    assert error_distribution(shuffled) == d
    assert error_distribution([result()])[T.EM] == 1.0
    with pytest.raises(AnalysisError):
        error_distribution([result()], where=lambda r: False)


def test_pie_carries_label():
    d = error_distribution(mix(PAL_MIX))
    svg = pie_chart("PAL+gpt-4-1106", [(t.value, d[t] * 100) for t in T])
    assert "49.4" in svg and svg == pie_chart("PAL+gpt-4-1106", [(t.value, d[t] * 100) for t in T])


def test_deployment():
    rs = [result(wall=40.0, f1=1.0, case="a"), result(wall=50.0, f1=0.0, case="b")]
    (p,) = deployment_stats(rs)
    assert p.mean_wall_time == 45.0 and p.mean_f1 == 0.5 and p.n == 2
    with pytest.raises(NonSequentialRun):
        deployment_stats(rs, sequential=False)
    with pytest.warns(DegenerateTiming):
        (z,) = deployment_stats([result()])
    assert z.mean_wall_time == 0


def test_deployment_matches_recomputation():
    rng = random.Random(2)
    rs = [result(system=f"s{rng.randint(0, 3)}", f1=rng.random(), wall=rng.random() * 9, case=str(i)) for i in range(200)]
    for p in deployment_stats(rs):
        mine = [r for r in rs if r.system == p.system]
        assert abs(p.mean_wall_time - sum(r.wall_time for r in mine) / len(mine)) < 1e-12
        assert abs(p.mean_f1 - sum(r.f1 for r in mine) / len(mine)) < 1e-12


def test_csv_roundtrip():
    rows = load_reference()
    cells = {r["system"]: {t: float(r[t]) for t in ("1-3", "2-4", "3-5")} for r in rows}
    m = ScoreMatrix.from_cells(cells, scale=100)
    text = matrix_csv(m)
    back = read_matrix_csv(text)
    assert back.systems == m.systems and back.columns == m.columns
    for s in m.systems:
        for c in m.columns:
            assert abs(back.percent(s, c) - round(m.percent(s, c), 1)) < 1e-9
    assert matrix_csv(back) == text
    assert text.splitlines()[1].startswith("ReAct+gpt-4-1106,")


def test_empty_matrix_csv_is_header_only():
    assert matrix_csv(ScoreMatrix()) == "system,rank\n"
    assert distributions_csv({}) == "label,EM,AM,GE,RE,ME,TE\n"


def test_emit_report_is_deterministic(tmp_path):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        m = aggregate(mix(PAL_MIX))
    dists = {"all": error_distribution(mix(PAL_MIX))}
    a = emit_report(tmp_path / "a", m, distributions=dists)
    b = emit_report(tmp_path / "b", m, distributions=dists)
    assert [p.name for p in a] == [p.name for p in b]
    assert "deploy.csv" not in [p.name for p in a]
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    assert "49.4" in (tmp_path / "a" / "errors_all.svg").read_text()
