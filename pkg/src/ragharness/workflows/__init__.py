"""The four retrieval workflows and the feasible (workflow, model) systems."""

from __future__ import annotations

import time
from dataclasses import replace
from typing import Iterable, Sequence

from ..gateway import ModelRef
from .base import (
    DEFAULT_ROSTER,
    DFSDT_MODELS,
    InfeasibleSystem,
    Limits,
    ModelClient,
    OneShotExample,
    Step,
    SystemConfig,
    Workflow,
    WorkflowTrace,
    model_client,
    parse_action,
)
from .dfsdt import run_dfsdt
from .fc import run_fc
from .pal import ParseError, Program, UnboundVariable, parse_program, run_pal
from .prompts import one_shot_example, render_prompt
from .react import run_react

ENGINES = {
    Workflow.REACT: run_react,
    Workflow.PAL: run_pal,
    Workflow.DFSDT: run_dfsdt,
    Workflow.FC: run_fc,
}


def run_workflow(config, session, case, example, llm: ModelClient | None = None, timing: bool = False) -> WorkflowTrace:
    """Dispatch to the engine of ``config.workflow``; wall time only when ``timing``."""
    engine = ENGINES[config.workflow]
    if not timing:
        return engine(config, session, case, example, llm)
    start = time.perf_counter()
    trace = engine(config, session, case, example, llm)
    return replace(trace, wall_time=time.perf_counter() - start)


def feasible_systems(
    workflows: Iterable[Workflow | str] = tuple(Workflow),
    roster: Sequence[ModelRef | str] = DEFAULT_ROSTER,
    limits: Limits = Limits(),
    prompt_set: str = "default",
) -> list[SystemConfig]:
    """Every (workflow, model) pair passing the workflow's model gate.

    Order: by workflow (ReAct, PAL, DFSDT, FC), then roster order.
    """
    models = [m if isinstance(m, ModelRef) else ModelRef(m) for m in roster]
    chosen = {Workflow(w) for w in workflows}
    out = []
    for wf in Workflow:
        if wf not in chosen:
            continue
        for model in models:
            try:
                out.append(SystemConfig(wf, model, limits, prompt_set))
            except InfeasibleSystem:
                continue
    return out


__all__ = [
    "DEFAULT_ROSTER",
    "DFSDT_MODELS",
    "ENGINES",
    "InfeasibleSystem",
    "Limits",
    "OneShotExample",
    "ParseError",
    "Program",
    "Step",
    "SystemConfig",
    "UnboundVariable",
    "Workflow",
    "WorkflowTrace",
    "feasible_systems",
    "model_client",
    "one_shot_example",
    "parse_action",
    "parse_program",
    "render_prompt",
    "run_dfsdt",
    "run_fc",
    "run_pal",
    "run_react",
    "run_workflow",
]
