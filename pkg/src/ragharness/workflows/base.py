"""Trace types, system configuration and the model-client seam shared by all engines."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence

from ..environment import FaultKind, FaultRecord, Observation, ToolCall, ToolSpec
from ..gateway import (
    ChatTurn,
    GatewayError,
    GenerationParams,
    ModelRef,
    ScriptedModel,
    cached_complete,
    complete,
)

DFSDT_MODELS = frozenset({"gpt-4-1106", "gpt-3.5-turbo", "toolllama2-7b"})
DEFAULT_ROSTER = (
    "gpt-4-1106",
    "gpt-3.5-turbo",
    "llama2-7b-chat",
    "tulu-7b",
    "vicuna-13b",
    "llama2-13b",
    "codellama-13b",
    "toolllama2-7b",
)
MAX_PROGRAM_STATEMENTS = 16


class Workflow(str, enum.Enum):
    REACT = "ReAct"
    PAL = "PAL"
    DFSDT = "DFSDT"
    FC = "FC"


@dataclass(frozen=True)
class Limits:
    max_steps: int = 7
    max_nodes: int = 15
    max_depth: int = 7
    # proposals allowed per DFSDT node before it counts as exhausted
    branching: int = 2

    def __post_init__(self):
        for name in ("max_steps", "max_nodes", "max_depth", "branching"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    def to_dict(self) -> dict:
        return {
            "max_steps": self.max_steps,
            "max_nodes": self.max_nodes,
            "max_depth": self.max_depth,
            "branching": self.branching,
        }


class InfeasibleSystem(ValueError):
    pass


@dataclass(frozen=True)
class SystemConfig:
    workflow: Workflow
    model: ModelRef
    limits: Limits = Limits()
    prompt_set: str = "default"
    # lift the DFSDT model gate for models outside the evaluated set
    allow_any_dfsdt: bool = False
    # keep going after a tool fault and keep the interruption next to the answer
    answer_despite_fault: bool = False

    def __post_init__(self):
        object.__setattr__(self, "workflow", Workflow(self.workflow))
        if self.workflow is Workflow.FC and not self.model.supports_native_function_calls:
            raise InfeasibleSystem(f"FC needs native function calls; {self.model.id} has none")
        if self.workflow is Workflow.DFSDT and not self.allow_any_dfsdt and self.model.id not in DFSDT_MODELS:
            raise InfeasibleSystem(f"DFSDT is not run with {self.model.id}")

    @property
    def id(self) -> str:
        return f"{self.workflow.value}+{self.model.id}"


@dataclass(frozen=True)
class OneShotExample:
    question: str
    answer: str

    def render(self) -> str:
        return f"Question: {self.question}\nAnswer: {self.answer}"


@dataclass(frozen=True)
class Rejected:
    """A model reply refused at a step before the engine re-prompted."""

    reply: str
    error: str

    def to_dict(self) -> dict:
        return {"reply": self.reply, "error": self.error}


@dataclass(frozen=True)
class Step:
    thought: str | None = None
    call: ToolCall | None = None
    observation: Observation | None = None
    rejected: tuple[Rejected, ...] = ()

    def to_dict(self) -> dict:
        return {
            "thought": self.thought,
            "call": self.call.to_dict() if self.call else None,
            "observation": self.observation.to_dict() if self.observation else None,
            "rejected": [r.to_dict() for r in self.rejected],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Step":
        return cls(
            d.get("thought"),
            ToolCall.from_dict(d["call"]) if d.get("call") else None,
            Observation.from_dict(d["observation"]) if d.get("observation") else None,
            tuple(Rejected(r["reply"], r["error"]) for r in d.get("rejected", ())),
        )


def _retrieved(step: Step) -> str | None:
    obs = step.observation
    if obs is None or not obs.ok:
        return None
    # the Finish echo repeats the model's own answer; it is not retrieval
    if step.call is not None and step.call.tool == "Finish":
        return None
    return obs.text


@dataclass(frozen=True)
class WorkflowTrace:
    workflow: Workflow
    steps: tuple[Step, ...] = ()
    response: str | None = None
    interruption: FaultRecord | None = None
    completions: int = 0
    wall_time: float = 0.0
    meta: Mapping[str, Any] = field(default_factory=dict)

    @property
    def scratchpad(self) -> str:
        return "\n".join(t for t in map(_retrieved, self.steps) if t)

    @property
    def step_count(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "workflow": self.workflow.value,
            "steps": [s.to_dict() for s in self.steps],
            "scratchpad": self.scratchpad,
            "response": self.response,
            "interruption": self.interruption.to_dict() if self.interruption else None,
            "completions": self.completions,
            "step_count": self.step_count,
            "wall_time": self.wall_time,
            "meta": dict(self.meta),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=1)

    @classmethod
    def from_dict(cls, d: Mapping) -> "WorkflowTrace":
        return cls(
            Workflow(d["workflow"]),
            tuple(Step.from_dict(s) for s in d["steps"]),
            d.get("response"),
            FaultRecord.from_dict(d.get("interruption")),
            d.get("completions", 0),
            d.get("wall_time", 0.0),
            d.get("meta", {}),
        )


def model_fault(exc: BaseException) -> FaultRecord:
    return FaultRecord(FaultKind.MODEL_FAULT, f"{type(exc).__name__}: {exc}")


# -- model client -------------------------------------------------------------

ModelClient = Callable[[Sequence[ChatTurn], Sequence[ToolSpec] | None], ChatTurn]


def model_client(
    model: ModelRef,
    params: GenerationParams | None = None,
    *,
    backend: ScriptedModel | None = None,
    cache_dir: str | None = None,
    transport=None,
    retries: int = 2,
    backoff: float = 0.5,
) -> ModelClient:
    """Bind a model and its decoding parameters into a two-argument callable.

    The cache only fronts remote models; scripted replays are already free.
    """
    params = params or GenerationParams()
    kw = {"backend": backend, "transport": transport, "retries": retries, "backoff": backoff}

    def call(turns, tool_specs=None):
        if cache_dir is not None and model.kind.value == "remote":
            return cached_complete(cache_dir, model, list(turns), params, tool_specs, **kw)
        return complete(model, list(turns), params, tool_specs, **kw)

    return call


class CountingClient:
    """Wraps a client to count completions and turn gateway errors into faults."""

    def __init__(self, client: ModelClient):
        self.client = client
        self.calls = 0

    def __call__(self, turns, tool_specs=None) -> ChatTurn:
        self.calls += 1
        return self.client(turns, tool_specs)


MODEL_ERRORS = (GatewayError,)


# -- action parsing (ReAct and DFSDT share the reply format) ------------------

FINAL_TOOL = "Finish"
GIVE_UP_TOOLS = frozenset({"give_up", "GiveUp", "give_up_and_restart"})
_THOUGHT = re.compile(r"^\s*Thought\s*\d*\s*:\s*(.*?)(?=^\s*Action\s*\d*\s*:|^\s*Final Answer\s*:|\Z)", re.S | re.M)
_ACTION = re.compile(r"^\s*Action\s*\d*\s*:\s*(.*)\Z", re.S | re.M)
_FINAL = re.compile(r"^\s*Final Answer\s*:\s*(.*)\Z", re.S | re.M)
_CALL = re.compile(r"^([A-Za-z_]\w*)\s*\[(.*)\]$", re.S)


class ActionParseError(ValueError):
    pass


@dataclass(frozen=True)
class ParsedAction:
    thought: str | None
    tool: str
    arguments: Any
    # "call", "final" or "give_up"
    kind: str


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def parse_action(reply: str, specs: Sequence[ToolSpec]) -> ParsedAction:
    """Parse ``Thought: ...`` / ``Action: Tool[arg]`` (or ``Final Answer: x``).

    The bracket argument is a JSON object of named arguments, or plain text
    bound to the tool's first parameter. ``Finish[x]`` is always final.
    """
    text = reply.split("\nObservation", 1)[0]
    m = _THOUGHT.search(text)
    thought = m.group(1).strip() if m else None
    fm = _FINAL.search(text)
    am = _ACTION.search(text)
    if am is None:
        if fm is not None:
            return ParsedAction(thought, FINAL_TOOL, {"answer": _unquote(fm.group(1))}, "final")
        raise ActionParseError("no 'Action:' line in the reply")
    body = am.group(1).strip().splitlines()[0].strip() if am.group(1).strip() else ""
    cm = _CALL.match(body) or _CALL.match(am.group(1).strip())
    if cm is None:
        raise ActionParseError(f"action {body!r} is not of the form Tool[argument]")
    tool, raw = cm.group(1), cm.group(2)
    if tool in GIVE_UP_TOOLS:
        return ParsedAction(thought, tool, {}, "give_up")
    args: Any = None
    stripped = raw.strip()
    if stripped.startswith("{"):
        try:
            args = json.loads(stripped)
        except json.JSONDecodeError:
            args = None
    if not isinstance(args, dict):
        spec = next((s for s in specs if s.name == tool), None)
        if tool == FINAL_TOOL:
            name = "answer"
        elif spec is not None and spec.parameters:
            name = spec.parameters[0].name
        else:
            name = "input"
        args = {name: _unquote(raw)}
    kind = "final" if tool == FINAL_TOOL else "call"
    return ParsedAction(thought, tool, args, kind)


def with_wall_time(trace: WorkflowTrace, seconds: float) -> WorkflowTrace:
    return replace(trace, wall_time=seconds)
