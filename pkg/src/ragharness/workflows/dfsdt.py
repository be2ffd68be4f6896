"""DFSDT: depth-first search over tool-call decisions with backtracking.

Every model proposal is one node. A proposal whose call faults, is refused
by the environment or cannot be parsed becomes a dead child; a ``give_up``
proposal also abandons its parent. Each node accepts at most
``limits.branching`` proposals, after which the search backs up to the
deepest ancestor with budget left. The first ``Finish`` wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..environment import EnvSession, Observation
from ..gateway import ChatTurn, Role
from .base import (
    MODEL_ERRORS,
    ActionParseError,
    CountingClient,
    ModelClient,
    OneShotExample,
    Step,
    SystemConfig,
    Workflow,
    WorkflowTrace,
    model_client,
    model_fault,
    parse_action,
)
from .prompts import render_prompt
from .react import format_call, transcript


@dataclass
class _Node:
    step: Step | None
    depth: int
    budget: int
    failed: list[str] = field(default_factory=list)


def _failed_note(failed: list[str]) -> str:
    if not failed:
        return ""
    lines = ["Already tried from this point, and failed:"]
    lines += [f"- {f}" for f in failed]
    lines.append("Propose something different.")
    return "\n".join(lines)


def run_dfsdt(
    config: SystemConfig,
    session: EnvSession,
    case,
    example: OneShotExample,
    llm: ModelClient | None = None,
) -> WorkflowTrace:
    if config.workflow is not Workflow.DFSDT:
        raise ValueError(f"run_dfsdt got a {config.workflow.value} system")
    limits = config.limits
    client = CountingClient(llm or model_client(config.model))
    specs = session.list_tools()
    has_finish = any(s.name == "Finish" for s in specs)
    path = [_Node(None, 0, limits.branching)]
    last_path: list[Step] = []
    explored: list[dict] = []
    nodes = 0

    def steps_of(p):
        return [n.step for n in p[1:]]

    def done(response=None, interruption=None, winning=None):
        steps = winning if winning is not None else (steps_of(path) if len(path) > 1 else last_path)
        meta = {"nodes_expanded": nodes, "explored": explored}
        return WorkflowTrace(
            Workflow.DFSDT, tuple(steps), response, interruption, client.calls, meta=meta
        )

    while nodes < limits.max_nodes and path:
        parent = path[-1]
        if parent.budget == 0 or parent.depth >= limits.max_depth:
            path.pop()
            continue
        parent.budget -= 1
        scratch = transcript(steps_of(path))
        note = _failed_note(parent.failed)
        prompt = render_prompt(
            Workflow.DFSDT,
            session.domain,
            tools=specs,
            example=example,
            question=case.question,
            scratchpad="\n".join(x for x in (scratch, note) if x),
            prompt_set=config.prompt_set,
        )
        try:
            reply = client([ChatTurn(Role.USER, prompt)])
        except MODEL_ERRORS as exc:
            return done(interruption=model_fault(exc))
        nodes += 1
        depth = parent.depth + 1
        try:
            action = parse_action(reply.content, specs)
        except ActionParseError as exc:
            parent.failed.append(f"unparseable reply ({exc})")
            explored.append({"depth": depth, "status": "dead", "reply": reply.content, "reason": str(exc)})
            continue
        if action.kind == "give_up":
            explored.append({"depth": depth, "status": "give_up", "reply": reply.content})
            if len(path) > 1:
                # abandon the node the model gave up on
                path.pop()
                call = parent.step.call
                path[-1].failed.append(f"{format_call(call.tool, call.arguments)} (given up later)")
            else:
                parent.failed.append("gave up")
            continue
        if action.kind == "final" and not has_finish:
            answer = str(action.arguments.get("answer", "")).strip()
            step = Step(action.thought, None, None)
            explored.append({"depth": depth, "status": "answer", "reply": reply.content})
            return done(response=answer, winning=steps_of(path) + [step])
        call, obs = session.call(action.tool, action.arguments)
        step = Step(action.thought, call, obs)
        if obs.fault is not None:
            parent.failed.append(f"{format_call(call.tool, call.arguments)} -> {obs.render()}")
            explored.append({"depth": depth, "status": "dead", "call": call.to_dict(), "reason": obs.fault.detail})
            continue
        if action.kind == "final":
            explored.append({"depth": depth, "status": "answer", "call": call.to_dict()})
            return done(response=_answer(obs), winning=steps_of(path) + [step])
        explored.append({"depth": depth, "status": "open", "call": call.to_dict()})
        path.append(_Node(step, depth, limits.branching))
        last_path = steps_of(path)
    return done()


def _answer(obs: Observation) -> str:
    structured = obs.structured if isinstance(obs.structured, dict) else {}
    return str(structured.get("answer", obs.text)).strip()

