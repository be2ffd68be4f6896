import json
import warnings

import pytest

from ragharness.runner import default_templates
from ragharness.taskgen import (
    TASKS,
    EmptyDerivedAnswer,
    MalformedCase,
    MalformedTemplate,
    NoEligibleRecord,
    PoolUnderfilled,
    QuestionTemplate,
    TaskGenError,
    build_pool,
    convert_dataset,
    dump_cases,
    evaluate_path,
    instantiate,
    load_existing,
    load_templates,
    regenerate,
    sample_test_set,
)
from ragharness.text import normalize_text


@pytest.fixture(scope="module")
def aminer_templates():
    return load_templates(default_templates("aminer"))


@pytest.fixture(scope="module")
def wiki_templates():
    return load_templates(default_templates("wiki"))


def of_task(templates, tid):
    return [t for t in templates if t.task_id == tid]


def test_task_registry():
    assert len(TASKS) == 12
    assert TASKS["1-3"].dataset == "Soay-Easy" and TASKS["3-5"].level.value == "KA"
    assert sum(t.domain.value == "aminer" for t in TASKS.values()) == 3


def test_lecun_worked_example(aminer_kb, aminer_templates):
    tpl = next(t for t in aminer_templates if t.id == "soay-interest")
    lecun = aminer_kb.records["p1"]
    from ragharness.taskgen import _eligible, _make_case

    case = _make_case(tpl, lecun, aminer_kb, _eligible(tpl, lecun, aminer_kb), "1-3")
    assert case.question == "What are the research interests of Yann Lecun at New York University?"
    assert case.gold == "AI, Machine Learning, Computer Vision, Robotics, Image Compression"
    assert case.case_id == "soay-interest:p1"
    assert regenerate(case, {tpl.id: tpl}, aminer_kb) == case


def test_instantiate_is_deterministic(aminer_kb, aminer_templates):
    tpl = aminer_templates[0]
    assert instantiate(tpl, aminer_kb, 7) == instantiate(tpl, aminer_kb, 7)
    picks = {instantiate(tpl, aminer_kb, s).case_id for s in range(20)}
    assert len(picks) > 1


@pytest.mark.parametrize("domain,tid", [("aminer", "1-3"), ("aminer", "2-4"), ("aminer", "3-5"), ("wiki", "1-1"), ("wiki", "1-2"), ("wiki", "3-4")])
def test_pool_and_sample(domain, tid, aminer_kb, wiki_kb, aminer_templates, wiki_templates):
    kb, templates = (aminer_kb, aminer_templates) if domain == "aminer" else (wiki_kb, wiki_templates)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PoolUnderfilled)
        pool = build_pool(of_task(templates, tid), kb, 1000, seed=0, task_id=tid)
    assert len(pool) >= 100
    questions = [normalize_text(c.question) for c in pool]
    assert len(set(questions)) == len(questions)
    assert all(c.gold.strip() for c in pool)
    test_set = sample_test_set(pool.cases, 100, seed=0)
    assert len({c.case_id for c in test_set}) == 100
    assert [c.case_id for c in sample_test_set(pool.cases, 100, seed=0)] == [c.case_id for c in test_set]
    assert sum(pool.yields.values()) == len(pool)
    # every generated case can be rebuilt from provenance
    index = {t.id: t for t in templates}
    for c in test_set:
        assert regenerate(c, index, kb) == c


def test_underfilled_pool_warns(aminer_kb, aminer_templates):
    with pytest.warns(PoolUnderfilled) as rec:
        pool = build_pool(of_task(aminer_templates, "1-3")[:1], aminer_kb, 10_000, seed=1)
    assert rec[0].message.got == len(pool) and pool.warning is not None
    with pytest.raises(ValueError):
        build_pool(aminer_templates, aminer_kb, 0, seed=1)


def test_sample_too_large():
    with pytest.raises(ValueError):
        sample_test_set([], 1, 0)


def test_path_steps(aminer_kb):
    pub = aminer_kb.referencing("authors", "p1")[0]
    assert evaluate_path("title", pub, aminer_kb) == [pub.get("title")]
    coauthors = evaluate_path("~authors|authors|name", aminer_kb.records["p1"], aminer_kb)
    assert "Yann Lecun" not in coauthors and coauthors
    assert evaluate_path("~authors|count", aminer_kb.records["p1"], aminer_kb) == len(aminer_kb.referencing("authors", "p1"))


def test_no_eligible_record(aminer_kb):
    tpl = QuestionTemplate.from_dict(
        {"id": "t", "task_id": "1-3", "kind": "Scholar", "text": "Who is {n}?", "bindings": {"n": "name"}, "answer_rule": "name", "requires": ["no_such_attr"]}
    )
    with pytest.raises(NoEligibleRecord):
        instantiate(tpl, aminer_kb, 0)


def test_empty_answer(aminer_kb):
    tpl = QuestionTemplate.from_dict(
        {"id": "t", "task_id": "1-3", "kind": "Scholar", "text": "Who is {n}?", "bindings": {"n": "name"}, "answer_rule": "email", "requires": []}
    )
    bare = [r for r in aminer_kb.of_kind("Scholar") if not r.get("email")]
    if bare:
        from ragharness.taskgen import _make_case

        with pytest.raises(EmptyDerivedAnswer):
            _make_case(tpl, bare[0], aminer_kb, {"n": "x"}, "1-3")


@pytest.mark.parametrize(
    "obj",
    [
        {"id": "t", "task_id": "1-3", "kind": "Scholar", "text": "Who is {n}?", "bindings": {}, "answer_rule": "name"},
        {"id": "t", "task_id": "1-3", "kind": "Nope", "text": "x", "bindings": {}, "answer_rule": "name"},
        {"id": "t", "task_id": "1-3", "kind": "Scholar", "text": "x", "bindings": {}, "answer_rule": "bad step!"},
    ],
)
def test_malformed_templates(tmp_path, obj):
    p = tmp_path / "t.jsonl"
    p.write_text(json.dumps(obj) + "\n")
    with pytest.raises(MalformedTemplate):
        load_templates(p)


def test_dump_and_load_roundtrip(tmp_path, aminer_kb, aminer_templates):
    pool = build_pool(of_task(aminer_templates, "1-3"), aminer_kb, 50, seed=3, task_id="1-3")
    p = tmp_path / "cases.jsonl"
    dump_cases(pool, p)
    assert load_existing(p, "1-3") == pool.cases


def test_load_existing_errors(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "question": "q", "gold": "g"}\n{"id": "a", "question": "q2", "gold": "g"}\n')
    with pytest.raises(MalformedCase) as err:
        load_existing(p, "3-1")
    assert err.value.line == 2
    p.write_text('{"id": "a", "question": "q"}\n')
    with pytest.raises(MalformedCase):
        load_existing(p, "3-1")
    with pytest.raises(TaskGenError):
        load_existing(tmp_path / "missing.jsonl", "3-1")


def test_load_existing_tags_provenance(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "h1", "question": "Who?", "gold": "Ada"}\n')
    (case,) = load_existing(p, "3-1")
    assert case.provenance == {"source": "Existing", "dataset": "HotpotQA", "original_id": "h1"}


def test_convert_dataset(tmp_path):
    raw = [{"_id": "x1", "question": "Q1?", "answer": "A"}, {"_id": "x2", "question": "Q2?", "answer": "B"}]
    out = tmp_path / "hp.jsonl"
    assert convert_dataset(raw, "hotpotqa", out) == 2
    assert [c.gold for c in load_existing(out, "3-1")] == ["A", "B"]
    assert convert_dataset([{"question": "Q", "answer": ["a", "b"]}], "kqapro", out) == 1
    assert load_existing(out, "3-4")[0].gold == "a, b"
