"""Benchmark construction: task registry, template instantiation, case files.

Template paths
--------------
Bindings and answer rules are pipelines of steps separated by ``|``, applied
to the list ``[anchor]``:

``attr``
    terminal; the attribute values of the current records (lists flattened)
``rel`` / ``~rel``
    follow a relation forward, or find records whose ``rel`` contains the
    current ones; the anchor is always dropped, results in ascending id
``first`` / ``max:attr`` / ``min:attr``
    keep one record (ties broken by ascending id)
``count``
    terminal; number of current records

``"~authors|max:citation_count|title"`` is the title of a scholar's most
cited paper; ``"~authors|authors|name"`` lists a scholar's coauthors.
"""

from __future__ import annotations

import enum
import json
import random
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .knowledge import Domain, KnowledgeBase, KnowledgeRecord, RecordKind
from .text import normalize_text, render_value

DEFAULT_TEST_SET_SIZE = 100
PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")


class Level(str, enum.Enum):
    KS = "KS"
    KU = "KU"
    KA = "KA"


class Source(str, enum.Enum):
    EXISTING = "Existing"
    REFRESHING = "Refreshing"


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    dataset: str
    domain: Domain
    level: Level
    pool_size: int
    source: Source
    test_set_size: int = DEFAULT_TEST_SET_SIZE
    metric: str = "F1"

    def __post_init__(self):
        if self.test_set_size > self.pool_size:
            raise ValueError(f"task {self.task_id}: test set larger than pool")


def _t(tid, dataset, domain, level, pool, source):
    return TaskSpec(tid, dataset, Domain(domain), Level(level), pool, Source(source))


TASKS: dict[str, TaskSpec] = {
    t.task_id: t
    for t in (
        _t("1-1", "High-Freq.", "wiki", "KS", 20_600_000, "Refreshing"),
        _t("1-2", "Low-Freq.", "wiki", "KS", 20_600_000, "Refreshing"),
        _t("2-1", "COPEN-CSJ", "wiki", "KU", 3_900, "Existing"),
        _t("2-2", "COPEN-CPJ", "wiki", "KU", 4_700, "Existing"),
        _t("2-3", "COPEN-CiC", "wiki", "KU", 2_300, "Existing"),
        _t("3-1", "HotpotQA", "wiki", "KA", 7_400, "Existing"),
        _t("3-2", "2WikiMulti.", "wiki", "KA", 12_600, "Existing"),
        _t("3-3", "MuSiQue", "wiki", "KA", 2_500, "Existing"),
        _t("3-4", "KQA Pro", "wiki", "KA", 1_200, "Refreshing"),
        _t("1-3", "Soay-Easy", "aminer", "KS", 12_700, "Refreshing"),
        _t("2-4", "Profiling", "aminer", "KU", 1_800, "Existing"),
        _t("3-5", "Soay-Hard", "aminer", "KA", 12_700, "Refreshing"),
    )
}


class TaskGenError(Exception):
    pass


class NoEligibleRecord(TaskGenError):
    pass


class EmptyDerivedAnswer(TaskGenError):
    pass


class MalformedCase(TaskGenError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class MalformedTemplate(TaskGenError):
    pass


class PoolUnderfilled(UserWarning):
    def __init__(self, got: int, want: int):
        super().__init__(f"pool underfilled: {got} of {want} cases")
        self.got = got
        self.want = want


@dataclass(frozen=True)
class QuestionTemplate:
    id: str
    task_id: str
    kind: RecordKind
    text: str
    bindings: Mapping[str, str]
    answer_rule: str
    requires: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", RecordKind(self.kind))
        missing = set(PLACEHOLDER.findall(self.text)) - set(self.bindings)
        if missing:
            raise MalformedTemplate(f"template {self.id}: unbound placeholders {sorted(missing)}")
        for path in [self.answer_rule, *self.bindings.values()]:
            _parse_path(path, self.id)

    @classmethod
    def from_dict(cls, d: Mapping) -> "QuestionTemplate":
        try:
            return cls(
                id=d["id"],
                task_id=d["task_id"],
                kind=d["kind"],
                text=d["text"],
                bindings=dict(d["bindings"]),
                answer_rule=d["answer_rule"],
                requires=tuple(d.get("requires", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedTemplate(f"bad template {d!r}: {exc}") from None


@dataclass(frozen=True)
class TestCase:
    case_id: str
    task_id: str
    question: str
    gold: str
    provenance: Mapping[str, object] = field(default_factory=dict)

    __test__ = False  # not a pytest class

    def to_dict(self) -> dict:
        return {
            "id": self.case_id,
            "task_id": self.task_id,
            "question": self.question,
            "gold": self.gold,
            "provenance": dict(self.provenance),
        }


def load_templates(path: str | Path) -> list[QuestionTemplate]:
    p = Path(path)
    if not p.is_file():
        raise TaskGenError(f"template file not found: {p}")
    out = []
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedTemplate(f"{p}:{lineno}: {exc.msg}") from None
        out.append(QuestionTemplate.from_dict(obj))
    return out


# -- path evaluation ----------------------------------------------------------

_NAV = re.compile(r"^~?[A-Za-z_]\w*$")


def _parse_path(path: str, where: str) -> list[str]:
    steps = [s.strip() for s in path.split("|")]
    if not steps or any(not s for s in steps):
        raise MalformedTemplate(f"{where}: empty step in {path!r}")
    for s in steps[:-1]:
        if s in ("count",) or not (s == "first" or s.startswith(("max:", "min:")) or _NAV.match(s)):
            raise MalformedTemplate(f"{where}: bad intermediate step {s!r} in {path!r}")
    last = steps[-1]
    if not (last in ("count", "first") or last.startswith(("max:", "min:")) or _NAV.match(last)):
        raise MalformedTemplate(f"{where}: bad final step {last!r} in {path!r}")
    return steps


def evaluate_path(path: str, anchor: KnowledgeRecord, kb: KnowledgeBase):
    """Evaluate a template path; returns a list of values, or an int for ``count``."""
    steps = _parse_path(path, "path")
    current: list[KnowledgeRecord] = [anchor]
    for i, step in enumerate(steps):
        last = i == len(steps) - 1
        if step == "count" and last:
            return len(current)
        if step == "first":
            current = current[:1]
        elif step.startswith(("max:", "min:")):
            attr = step[4:]
            scored = [r for r in current if isinstance(r.attributes.get(attr), (int, float))]
            if not scored:
                current = []
            else:
                sign = -1 if step.startswith("max:") else 1
                current = [min(scored, key=lambda r: (sign * r.attributes[attr], r.id))]
        elif step.startswith("~") or step in _relations_of(current):
            rel = step.lstrip("~")
            found: dict[str, KnowledgeRecord] = {}
            for rec in current:
                if step.startswith("~"):
                    targets = kb.referencing(rel, rec.id)
                else:
                    targets = [kb.records[t] for t in rec.relations.get(rel, ())]
                for t in targets:
                    if t.id != anchor.id:
                        found.setdefault(t.id, t)
            ordered = list(found.values())
            if step.startswith("~"):
                ordered.sort(key=lambda r: r.id)
            current = ordered
        elif last:
            values = []
            for rec in current:
                v = rec.attributes.get(step)
                if v is None or v == "" or v == ():
                    continue
                values.extend(v if isinstance(v, tuple) else [v])
            return values
        else:
            raise TaskGenError(f"step {step!r} is not a relation of the current records")
    return [r.primary_name for r in current]


def _relations_of(records: Iterable[KnowledgeRecord]) -> set[str]:
    return {k for r in records for k in r.relations}


def _render(values) -> str:
    if isinstance(values, int):
        return str(values)
    seen = []
    for v in values:
        if v not in seen:
            seen.append(v)
    return render_value(seen)


def _eligible(template: QuestionTemplate, rec: KnowledgeRecord, kb: KnowledgeBase) -> dict | None:
    if rec.kind is not template.kind:
        return None
    for attr in template.requires:
        v = rec.attributes.get(attr)
        if v is None or v == "" or v == ():
            return None
    filled = {}
    for ph, path in template.bindings.items():
        text = _render(evaluate_path(path, rec, kb))
        if not text:
            return None
        filled[ph] = text
    return filled


def _make_case(template, rec, kb, filled, task_id) -> TestCase:
    question = PLACEHOLDER.sub(lambda m: filled[m.group(1)], template.text)
    gold = _render(evaluate_path(template.answer_rule, rec, kb))
    if not gold.strip():
        raise EmptyDerivedAnswer(f"template {template.id} on {rec.id} derives an empty answer")
    return TestCase(
        case_id=f"{template.id}:{rec.id}",
        task_id=task_id or template.task_id,
        question=question,
        gold=gold,
        provenance={"template": template.id, "records": [rec.id]},
    )


def eligible_records(template: QuestionTemplate, kb: KnowledgeBase) -> list[KnowledgeRecord]:
    return [r for r in kb.records.values() if _eligible(template, r, kb) is not None]


def instantiate(
    template: QuestionTemplate,
    kb: KnowledgeBase,
    seed: int,
    task_id: str | None = None,
) -> TestCase:
    """Fill ``template`` from one record sampled deterministically by ``seed``."""
    pool = eligible_records(template, kb)
    if not pool:
        raise NoEligibleRecord(f"no record satisfies template {template.id}")
    rec = random.Random(f"{seed}:{template.id}").choice(pool)
    return _make_case(template, rec, kb, _eligible(template, rec, kb), task_id)


def regenerate(case: TestCase, templates: Mapping[str, QuestionTemplate], kb: KnowledgeBase) -> TestCase:
    """Rebuild a generated case from its provenance alone."""
    tpl = templates[case.provenance["template"]]
    rec = kb.records[case.provenance["records"][0]]
    filled = _eligible(tpl, rec, kb)
    if filled is None:
        raise NoEligibleRecord(f"{rec.id} no longer satisfies {tpl.id}")
    return _make_case(tpl, rec, kb, filled, case.task_id)


@dataclass
class PoolResult:
    cases: list[TestCase]
    yields: dict[str, int]
    target: int
    warning: PoolUnderfilled | None = None

    def __iter__(self):
        return iter(self.cases)

    def __len__(self):
        return len(self.cases)


def build_pool(
    templates: Sequence[QuestionTemplate],
    kb: KnowledgeBase,
    target: int,
    seed: int,
    task_id: str | None = None,
) -> PoolResult:
    """Round-robin over templates until ``target`` unique questions exist.

    Each template walks its eligible records in a seeded shuffle; cases whose
    question text repeats or whose answer is empty are skipped. An underfilled
    pool is returned with a :class:`PoolUnderfilled` warning.
    """
    if target < 1:
        raise ValueError("target must be at least 1")
    queues = []
    for tpl in templates:
        recs = eligible_records(tpl, kb)
        random.Random(f"{seed}:{tpl.id}").shuffle(recs)
        queues.append((tpl, recs))
    yields = {tpl.id: 0 for tpl in templates}
    seen: set[str] = set()
    cases: list[TestCase] = []
    cursors = [0] * len(queues)
    while len(cases) < target:
        progressed = False
        for qi, (tpl, recs) in enumerate(queues):
            if len(cases) >= target:
                break
            while cursors[qi] < len(recs):
                rec = recs[cursors[qi]]
                cursors[qi] += 1
                try:
                    case = _make_case(tpl, rec, kb, _eligible(tpl, rec, kb), task_id)
                except EmptyDerivedAnswer:
                    continue
                key = normalize_text(case.question)
                if key in seen:
                    continue
                seen.add(key)
                cases.append(case)
                yields[tpl.id] += 1
                progressed = True
                break
        if not progressed:
            break
    result = PoolResult(cases, yields, target)
    if len(cases) < target:
        result.warning = PoolUnderfilled(len(cases), target)
        warnings.warn(result.warning, stacklevel=2)
    return result


def sample_test_set(pool: Sequence[TestCase], k: int, seed: int) -> list[TestCase]:
    cases = list(pool)
    if k > len(cases):
        raise ValueError(f"cannot sample {k} cases from a pool of {len(cases)}")
    return random.Random(seed).sample(cases, k)


def dump_cases(cases: Iterable[TestCase], path: str | Path) -> None:
    lines = [json.dumps(c.to_dict(), ensure_ascii=False, sort_keys=True) for c in cases]
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")


def load_existing(path: str | Path, task_id: str, dataset: str | None = None) -> list[TestCase]:
    """Read a case-per-line file with at least ``question``, ``gold`` and ``id``.

    Lines carrying a ``provenance`` object keep it (so dumped pools round-trip);
    otherwise the case is tagged with its source dataset and original id.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise TaskGenError(f"cannot read case file {path}: {exc}") from exc
    dataset = dataset or (TASKS[task_id].dataset if task_id in TASKS else task_id)
    cases = []
    ids = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise MalformedCase(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise MalformedCase(lineno, "case must be an object")
        for key in ("id", "question", "gold"):
            if not isinstance(obj.get(key), str) or not obj[key].strip():
                raise MalformedCase(lineno, f"missing or empty {key!r}")
        if obj["id"] in ids:
            raise MalformedCase(lineno, f"duplicate id {obj['id']!r}")
        ids.add(obj["id"])
        prov = obj.get("provenance") or {"source": Source.EXISTING.value, "dataset": dataset, "original_id": obj["id"]}
        cases.append(TestCase(obj["id"], obj.get("task_id", task_id), obj["question"], obj["gold"], prov))
    return cases


# Converters for the public datasets behind the Existing tasks; the data itself
# is not shipped. Each maps one raw record to (id, question, gold).
DATASET_FIELDS = {
    "hotpotqa": ("_id", "question", "answer"),
    "2wikimultihopqa": ("_id", "question", "answer"),
    "musique": ("id", "question", "answer"),
    "kqapro": (None, "question", "answer"),
}


def convert_dataset(records: Iterable[Mapping], name: str, out_path: str | Path, limit: int | None = None) -> int:
    """Write raw dataset records as a case-per-line file; returns the count."""
    id_key, q_key, a_key = DATASET_FIELDS[name.lower()]
    lines = []
    for i, rec in enumerate(records):
        if limit is not None and len(lines) >= limit:
            break
        rid = str(rec[id_key]) if id_key else f"{name}-{i}"
        answer = rec[a_key]
        if isinstance(answer, list):
            answer = render_value(answer)
        lines.append(json.dumps({"id": rid, "question": rec[q_key], "gold": str(answer)}, ensure_ascii=False))
    Path(out_path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    return len(lines)
