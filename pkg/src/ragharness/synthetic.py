"""Deterministic stand-in models: per-case scripts derived from case provenance.

For each generated case the oracle knows the anchor record, so it can emit the
tool calls a competent system would make. A digest of the case id picks a
variant so a scripted run exercises every response type: most cases follow
the oracle, some answer wrongly, some answer from memory without retrieval,
and some misuse a tool.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .knowledge import KnowledgeBase, RecordKind
from .taskgen import TASKS, QuestionTemplate, TestCase
from .workflows.base import Workflow

VARIANTS = 20


def _bucket(case_id: str, salt: str = "") -> int:
    return int(hashlib.sha256(f"{salt}{case_id}".encode()).hexdigest(), 16) % VARIANTS


def variant(case_id: str) -> str:
    b = _bucket(case_id)
    return {0: "wrong", 1: "misuse", 2: "memory"}.get(b, "oracle")


def fault_plan(cases: Iterable[TestCase], rate: int = VARIANTS) -> dict[str, list[int]]:
    """Schedule an internal fault on the first call of roughly one case in ``rate``."""
    return {c.case_id: [1] for c in cases if _bucket(c.case_id, "fault") % rate == 3}


def oracle_calls(case: TestCase, kb: KnowledgeBase, templates: Mapping[str, QuestionTemplate]) -> list[tuple[str, dict]]:
    """The tool calls that retrieve the facts behind ``case``."""
    tpl = templates.get(case.provenance.get("template", ""))
    rec = kb.records[case.provenance["records"][0]]
    rule = tpl.answer_rule if tpl else ""
    if rec.kind is RecordKind.ARTICLE:
        calls = [("Search", {"entity": rec.primary_name})]
        first = rule.split("|")[0]
        if first in rec.relations and rec.relations[first]:
            calls.append(("Search", {"entity": kb.records[rec.relations[first][0]].primary_name}))
        calls.append(("Lookup", {"keyword": case.gold.split(",")[0]}))
        return calls
    if rec.kind is RecordKind.SCHOLAR:
        query = {"name": rec.primary_name}
        if rec.get("organization"):
            query["organization"] = rec.get("organization")
        calls = [("searchPerson", query)]
        if rule == "interest":
            calls.append(("getPersonInterest", {"id": rec.id}))
        elif rule.startswith("~authors|authors"):
            calls.append(("getCoauthors", {"id": rec.id}))
        elif rule.startswith("~authors|max:citation_count"):
            calls.append(("getPersonPubs", {"id": rec.id}))
            pubs = kb.referencing("authors", rec.id)
            top = min(pubs, key=lambda p: (-p.get("citation_count", 0), p.id))
            calls.append(("getPublication", {"id": top.id}))
        else:
            calls.append(("getPersonBasicInfo", {"id": rec.id}))
        return calls
    first_author = rec.relations["authors"][0]
    calls = [("searchPublication", {"title": rec.primary_name}), ("getPublication", {"id": rec.id})]
    tool = "getPersonInterest" if rule.endswith("interest") else "getPersonBasicInfo"
    calls.append((tool, {"id": first_author}))
    return calls


def _action(tool: str, args: dict) -> str:
    if len(args) == 1:
        (value,) = args.values()
        return f"{tool}[{value}]"
    return f"{tool}[{json.dumps(args, ensure_ascii=False, sort_keys=True)}]"


def _pal_program(calls: Sequence[tuple[str, dict]], answer: str) -> str:
    lines = []
    for i, (tool, args) in enumerate(calls, start=1):
        rendered = ", ".join(f"{k}={json.dumps(v, ensure_ascii=False)}" for k, v in args.items())
        lines.append(f"v{i} = {tool}({rendered})")
    lines.append(f"answer = {json.dumps(answer, ensure_ascii=False)}")
    return "\n".join(lines)


def replies_for(case: TestCase, workflow: Workflow, calls: list[tuple[str, dict]]) -> list:
    kind = variant(case.case_id)
    answer = "I do not know" if kind == "wrong" else case.gold
    if kind == "memory":
        calls = []
    if workflow is Workflow.PAL:
        program = _pal_program(calls, answer)
        if kind == "misuse":
            program = "def main():\n    return searchPerson('x')"
        return [program]
    if workflow is Workflow.FC:
        out: list = [{"content": "", "tool_call": {"name": t, "arguments": a}} for t, a in calls]
        if kind == "misuse":
            return [{"content": "", "tool_call": {"name": "noSuchTool", "arguments": {}}}]
        return out + [answer]
    steps = [f"Thought: I should call {t}.\nAction: {_action(t, a)}" for t, a in calls]
    final = f"Thought: I have the answer.\nAction: Finish[{answer}]"
    if kind == "misuse":
        bad = "Thought: Let me try.\nAction: Frobnicate[x]"
        if workflow is Workflow.REACT:
            return [bad, bad]
        # DFSDT: a dead first proposal, then the oracle path
        return [bad, *steps, final]
    return steps + [final]


def build_scripts(
    cases: Sequence[TestCase],
    kbs: Mapping[str, KnowledgeBase],
    templates: Mapping[str, QuestionTemplate],
    workflows: Iterable[Workflow] = tuple(Workflow),
    domain_of: Mapping[str, str] | None = None,
) -> dict[Workflow, dict]:
    """One ``{"cases": {...}}`` script object per workflow."""
    out = {}
    for wf in workflows:
        per_case = {}
        for case in cases:
            dom = (domain_of or {}).get(case.task_id) or TASKS[case.task_id].domain.value
            calls = oracle_calls(case, kbs[dom], templates)
            per_case[case.case_id] = replies_for(case, Workflow(wf), calls)
        out[Workflow(wf)] = {"cases": per_case}
    return out


def write_scripts(out_dir: str | Path, scripts: Mapping[Workflow, dict]) -> dict[Workflow, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for wf, obj in scripts.items():
        p = out / f"{wf.value}.json"
        p.write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        paths[wf] = p
    return paths
