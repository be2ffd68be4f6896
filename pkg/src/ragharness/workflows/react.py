"""ReAct: alternate a model Thought/Action turn with a tool observation."""

from __future__ import annotations

import json

from ..environment import EnvSession, FaultKind, FaultRecord, Observation, misuse
from ..gateway import ChatTurn, Role
from .base import (
    MODEL_ERRORS,
    ActionParseError,
    CountingClient,
    ModelClient,
    OneShotExample,
    Rejected,
    Step,
    SystemConfig,
    Workflow,
    WorkflowTrace,
    model_client,
    model_fault,
    parse_action,
)
from .prompts import render_prompt

RETRIES_PER_STEP = 1


def transcript(steps, pending: list[Rejected] | None = None) -> str:
    """The Thought/Action/Observation history shown back to the model."""
    lines = []
    for i, step in enumerate(steps, start=1):
        if step.thought:
            lines.append(f"Thought {i}: {step.thought}")
        if step.call is not None:
            lines.append(f"Action {i}: {format_call(step.call.tool, step.call.arguments)}")
        if step.observation is not None:
            lines.append(f"Observation {i}: {step.observation.render()}")
    for r in pending or ():
        lines.append(f"(Your last reply was rejected: {r.error}. Reply with one Thought and one Action.)")
    return "\n".join(lines)


def format_call(tool: str, arguments) -> str:
    if isinstance(arguments, dict) and len(arguments) == 1:
        (value,) = arguments.values()
        if isinstance(value, str):
            return f"{tool}[{value}]"
    return f"{tool}[{json.dumps(arguments, ensure_ascii=False, sort_keys=True)}]"


def run_react(
    config: SystemConfig,
    session: EnvSession,
    case,
    example: OneShotExample,
    llm: ModelClient | None = None,
) -> WorkflowTrace:
    if config.workflow is not Workflow.REACT:
        raise ValueError(f"run_react got a {config.workflow.value} system")
    client = CountingClient(llm or model_client(config.model))
    specs = session.list_tools()
    steps: list[Step] = []
    response = None
    interruption: FaultRecord | None = None

    def done(**kw):
        return WorkflowTrace(Workflow.REACT, tuple(steps), completions=client.calls, **kw)

    while len(steps) < config.limits.max_steps:
        rejected: list[Rejected] = []
        while True:
            prompt = render_prompt(
                Workflow.REACT,
                session.domain,
                tools=specs,
                example=example,
                question=case.question,
                scratchpad=transcript(steps, rejected),
                prompt_set=config.prompt_set,
            )
            try:
                reply = client([ChatTurn(Role.USER, prompt)])
            except MODEL_ERRORS as exc:
                return done(response=response, interruption=interruption or model_fault(exc))
            try:
                action = parse_action(reply.content, specs)
            except ActionParseError as exc:
                if len(rejected) < RETRIES_PER_STEP:
                    rejected.append(Rejected(reply.content, str(exc)))
                    continue
                steps.append(Step(None, None, misuse(str(exc)), tuple(rejected)))
                return done(response=response, interruption=FaultRecord(FaultKind.TOOL_MISUSE, str(exc)))

            if action.kind == "final" and "Finish" not in {s.name for s in specs}:
                # the aminer toolset has no Finish tool; the engine takes the answer
                answer = action.arguments.get("answer", "")
                if not isinstance(answer, str):
                    answer = str(answer)
                steps.append(Step(action.thought, None, None, tuple(rejected)))
                return done(response=answer.strip(), interruption=interruption)

            call, obs = session.call(action.tool, action.arguments)
            fault = obs.fault
            if fault is not None and fault.kind is FaultKind.TOOL_MISUSE and len(rejected) < RETRIES_PER_STEP:
                rejected.append(Rejected(reply.content, fault.detail))
                continue
            steps.append(Step(action.thought, call, obs, tuple(rejected)))
            break

        if obs.fault is not None:
            if obs.fault.kind is FaultKind.TOOL_MISUSE or not config.answer_despite_fault:
                return done(response=response, interruption=obs.fault)
            interruption = interruption or obs.fault
            continue
        if action.kind == "final":
            return done(response=_answer(obs), interruption=interruption)
    return done(response=None, interruption=interruption)


def _answer(obs: Observation) -> str:
    structured = obs.structured if isinstance(obs.structured, dict) else {}
    return str(structured.get("answer", obs.text)).strip()
