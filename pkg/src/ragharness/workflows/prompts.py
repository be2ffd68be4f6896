"""Prompt templates per (workflow, domain) and the shared one-shot examples.

Templates are plain text files named ``<workflow>_<domain>.txt`` with the
placeholders ``{instruction}``, ``{tools}``, ``{example}``, ``{question}`` and
``{scratchpad}``. Substitution is literal, so other braces in a template
(JSON samples, say) pass through untouched.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

from ..environment import ToolSpec
from ..knowledge import Domain
from .base import OneShotExample, Workflow

PLACEHOLDERS = ("instruction", "tools", "example", "question", "scratchpad")

INSTRUCTIONS = {
    Domain.WIKI: "Answer the question by retrieving facts from an encyclopedia with the tools below.",
    Domain.AMINER: "Answer the question about scholars and publications by querying the academic graph with the tools below.",
}


def default_prompt_dir() -> Path:
    return Path(str(resources.files("ragharness") / "data" / "prompts"))


def resolve_prompt_dir(prompt_set: str) -> Path:
    return default_prompt_dir() if prompt_set in ("", "default") else Path(prompt_set)


@lru_cache(maxsize=64)
def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def template_path(workflow: Workflow, domain: Domain, prompt_set: str = "default") -> Path:
    return resolve_prompt_dir(prompt_set) / f"{Workflow(workflow).value.lower()}_{Domain(domain).value}.txt"


def render_tools(specs: Sequence[ToolSpec]) -> str:
    return "\n".join(f"- {s.signature()}: {s.description} Returns {s.returns}" for s in specs)


def render_prompt(
    workflow: Workflow,
    domain: Domain,
    *,
    tools: Sequence[ToolSpec],
    example: OneShotExample,
    question: str,
    scratchpad: str = "",
    prompt_set: str = "default",
) -> str:
    text = _read(str(template_path(workflow, domain, prompt_set)))
    values = {
        "instruction": INSTRUCTIONS[Domain(domain)],
        "tools": render_tools(tools),
        "example": example.render(),
        "question": question,
        "scratchpad": scratchpad,
    }
    for name in PLACEHOLDERS:
        text = text.replace("{" + name + "}", values[name])
    return text


@lru_cache(maxsize=8)
def _examples(prompt_dir: str) -> dict:
    path = Path(prompt_dir) / "examples.json"
    return json.loads(path.read_text(encoding="utf-8")) if path.is_file() else {}


def one_shot_example(task_id: str, domain: Domain | str, prompt_set: str = "default") -> OneShotExample:
    """The single worked example for a task; every workflow receives the same one."""
    table = _examples(str(resolve_prompt_dir(prompt_set)))
    entry = table.get(task_id) or table.get(Domain(domain).value)
    if entry is None:
        raise KeyError(f"no one-shot example for task {task_id!r}")
    return OneShotExample(entry["question"], entry["answer"])
