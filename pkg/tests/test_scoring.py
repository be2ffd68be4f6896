import csv
import random
from collections import Counter
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from ragharness.environment import FaultKind, FaultRecord
from ragharness.scoring import (
    CaseResult,
    ResponseType,
    classify,
    classify_response,
    score_trace,
    scratchpad_supports,
    token_f1,
)
from ragharness.taskgen import TestCase
from ragharness.text import normalize_tokens
from ragharness.workflows.base import Workflow, WorkflowTrace

TRUTH_TABLE = Path(__file__).parent / "data" / "classifier_truth_table.csv"
GOLD = "paris france"
KINDS = {"none": None, **{k.value: k for k in FaultKind}}


def oracle_f1(pred: str, gold: str) -> float:
    """Brute-force multiset matching: strike each matched gold token once."""
    p, g = normalize_tokens(pred), normalize_tokens(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    remaining = list(g)
    overlap = 0
    for tok in p:
        if tok in remaining:
            remaining.remove(tok)
            overlap += 1
    if overlap == 0:
        return 0.0
    prec, rec = Fraction(overlap, len(p)), Fraction(overlap, len(g))
    return float(2 * prec * rec / (prec + rec))


def realize(present, matched, useful):
    """Concrete (response, scratchpad) realizing a predicate combination."""
    if not present:
        return None, "some retrieved text"
    response = GOLD if matched else "lyon"
    return response, (f"notes: {response}." if useful else "nothing relevant")


def test_worked_values():
    assert token_f1("new york university", "the new york university") == 6 / 7
    assert token_f1("same words", "same words") == 1.0
    assert token_f1("a b", "c d") == 0.0
    assert token_f1("", "") == 1.0 and token_f1("", "x") == 0.0


def test_f1_matches_oracle_on_random_pairs():
    rng = random.Random(0)
    vocab = ["a", "b", "c", "The", "new", "york", "AI", "x-y", "1", ",", "ü"]
    for _ in range(10_000):
        p = " ".join(rng.choices(vocab, k=rng.randint(0, 6)))
        g = " ".join(rng.choices(vocab, k=rng.randint(0, 6)))
        assert abs(token_f1(p, g) - oracle_f1(p, g)) <= 1e-12


@given(st.text(max_size=30), st.text(max_size=30))
def test_f1_properties(p, g):
    v = token_f1(p, g)
    assert 0.0 <= v <= 1.0
    assert v == token_f1(g, p)
    assert (v == 1.0) == (Counter(normalize_tokens(p)) == Counter(normalize_tokens(g)))


def test_supports_examples():
    pad = "interests: ai, machine learning"
    assert scratchpad_supports(pad, "Machine Learning")
    assert not scratchpad_supports(pad, "robotics")
    assert scratchpad_supports(pad, pad)
    assert not scratchpad_supports(pad, "")


def test_truth_table_matches_oracle_file():
    with TRUTH_TABLE.open() as fh:
        rows = list(csv.DictReader(fh))
    seen = set()
    for row in rows:
        present, matched, useful = (row[k] == "1" for k in ("present", "matched", "useful"))
        response, pad = realize(present, matched, useful)
        got = classify(response, pad, KINDS[row["interruption"]], GOLD)
        assert got.value == row["expected"], row
        seen.add(got)
    assert seen == set(ResponseType)
    # every feasible combination is in the table exactly once
    keys = [(r["present"], r["matched"], r["useful"], r["interruption"]) for r in rows]
    assert len(keys) == len(set(keys)) == 20


def test_threshold_bounds():
    with pytest.raises(ValueError):
        classify("x", "", None, "x", 0)
    with pytest.raises(ValueError):
        classify("x", "", None, "x", 1.5)


def random_trace(rng):
    words = ["paris", "france", "lyon", "capital", "city"]
    response = None if rng.random() < 0.2 else " ".join(rng.choices(words, k=rng.randint(0, 3)))
    kind = rng.choice([None, *FaultKind])
    fault = FaultRecord(kind, "x") if kind else None
    trace = WorkflowTrace(Workflow.REACT, response=response, interruption=fault)
    pad = " ".join(rng.choices(words, k=rng.randint(0, 6)))
    return trace, pad


def test_randomized_totality_and_monotonicity():
    rng = random.Random(1)
    allowed = {
        (ResponseType.EM, ResponseType.GE),
        (ResponseType.AM, ResponseType.RE),
        (ResponseType.AM, ResponseType.ME),
        (ResponseType.AM, ResponseType.TE),
    }
    for _ in range(1000):
        trace, pad = random_trace(rng)
        kind = trace.interruption.kind if trace.interruption else None
        low = classify(trace.response, pad, kind, GOLD, 0.3)
        high = classify(trace.response, pad, kind, GOLD, 0.9)
        assert isinstance(low, ResponseType) and isinstance(high, ResponseType)
        assert low == high or (low, high) in allowed
        if low is ResponseType.EM:
            assert pad.strip()


def test_classify_examples_on_traces():
    trace = WorkflowTrace(Workflow.FC, response="Paris France")
    assert classify_response(trace, GOLD) is ResponseType.AM
    pal = WorkflowTrace(Workflow.PAL, interruption=FaultRecord(FaultKind.TOOL_MISUSE, "program rejected"))
    assert classify_response(pal, GOLD) is ResponseType.TE


def test_score_trace_and_roundtrip():
    case = TestCase("c1", "1-1", "Q?", GOLD)
    result = score_trace(WorkflowTrace(Workflow.PAL), case, "PAL+gpt-4-1106")
    assert result.f1 == 0.0 and result.response_type is ResponseType.RE
    assert CaseResult.from_dict(result.to_dict()) == result
