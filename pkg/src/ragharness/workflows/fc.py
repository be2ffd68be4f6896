"""FC: native function calling through structured tool_call turns."""

from __future__ import annotations

from ..environment import EnvSession, FaultKind, FaultRecord
from ..gateway import ChatTurn, Role
from .base import (
    MODEL_ERRORS,
    CountingClient,
    ModelClient,
    OneShotExample,
    Step,
    SystemConfig,
    Workflow,
    WorkflowTrace,
    model_client,
    model_fault,
)
from .prompts import render_prompt


def run_fc(
    config: SystemConfig,
    session: EnvSession,
    case,
    example: OneShotExample,
    llm: ModelClient | None = None,
) -> WorkflowTrace:
    if config.workflow is not Workflow.FC:
        raise ValueError(f"run_fc got a {config.workflow.value} system")
    if not config.model.supports_native_function_calls:
        raise ValueError(f"{config.model.id} has no native function calls")
    client = CountingClient(llm or model_client(config.model))
    specs = session.list_tools()
    system = render_prompt(
        Workflow.FC,
        session.domain,
        tools=specs,
        example=example,
        question=case.question,
        prompt_set=config.prompt_set,
    )
    turns = [ChatTurn(Role.SYSTEM, system), ChatTurn(Role.USER, case.question)]
    steps: list[Step] = []
    interruption: FaultRecord | None = None

    def done(**kw):
        return WorkflowTrace(Workflow.FC, tuple(steps), completions=client.calls, **kw)

    while len(steps) < config.limits.max_steps:
        try:
            reply = client(turns, specs)
        except MODEL_ERRORS as exc:
            return done(interruption=interruption or model_fault(exc))
        req = reply.tool_call
        if req is None:
            return done(response=reply.content.strip(), interruption=interruption)
        # undecodable arguments reach the environment raw and come back as misuse
        args = req.arguments if req.arguments is not None else req.raw_arguments
        call, obs = session.call(req.name, args)
        steps.append(Step(reply.content.strip() or None, call, obs))
        if obs.fault is not None:
            if obs.fault.kind is FaultKind.TOOL_MISUSE or not config.answer_despite_fault:
                return done(interruption=obs.fault)
            interruption = interruption or obs.fault
        elif call.tool == "Finish":
            answer = obs.structured.get("answer", "") if isinstance(obs.structured, dict) else obs.text
            return done(response=str(answer).strip(), interruption=interruption)
        turns = turns + [reply, ChatTurn(Role.TOOL, obs.render())]
    return done(interruption=interruption)
