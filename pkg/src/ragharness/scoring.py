"""Relaxed token F1 and the six-way response classifier."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Mapping

from .environment import FaultKind
from .text import normalize_tokens

DEFAULT_MATCH_THRESHOLD = 0.7

Tokenizer = Callable[[str], list]


class ResponseType(str, enum.Enum):
    EM = "EM"  # correct, supported by the scratchpad
    AM = "AM"  # correct, not supported by the scratchpad
    GE = "GE"  # wrong, although the scratchpad supports it
    RE = "RE"  # wrong, retrieval ran to completion
    ME = "ME"  # interrupted by the model side
    TE = "TE"  # interrupted by tool misuse or tool failure


RESPONSE_TYPES = tuple(ResponseType)


def token_f1(prediction: str, gold: str, tokenize: Tokenizer = normalize_tokens) -> float:
    pred = tokenize(prediction or "")
    ref = tokenize(gold or "")
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


def scratchpad_supports(scratchpad: str, response: str, tokenize: Tokenizer = normalize_tokens) -> bool:
    """True when the response tokens occur contiguously in the scratchpad tokens."""
    needle = tokenize(response or "")
    if not needle:
        return False
    hay = tokenize(scratchpad or "")
    n = len(needle)
    return any(hay[i : i + n] == needle for i in range(len(hay) - n + 1))


def classify(
    response: str | None,
    scratchpad: str,
    interruption: FaultKind | None,
    gold: str,
    match_threshold: float = DEFAULT_MATCH_THRESHOLD,
) -> ResponseType:
    if not 0 < match_threshold <= 1:
        raise ValueError("match_threshold must lie in (0, 1]")
    present = response is not None
    matched = present and token_f1(response, gold) >= match_threshold
    useful = present and scratchpad_supports(scratchpad, response)
    if matched:
        return ResponseType.EM if useful else ResponseType.AM
    if present and useful:
        return ResponseType.GE
    if interruption is None:
        return ResponseType.RE
    if FaultKind(interruption) is FaultKind.MODEL_FAULT:
        return ResponseType.ME
    return ResponseType.TE


def classify_response(trace, gold: str, match_threshold: float = DEFAULT_MATCH_THRESHOLD) -> ResponseType:
    """Classify a finished ``WorkflowTrace`` against the gold answer."""
    kind = trace.interruption.kind if trace.interruption is not None else None
    return classify(trace.response, trace.scratchpad, kind, gold, match_threshold)


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    task_id: str
    system: str
    f1: float
    response_type: ResponseType
    wall_time: float = 0.0
    trace_ref: str = ""
    response: str | None = None
    gold: str = ""

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "task_id": self.task_id,
            "system": self.system,
            "f1": self.f1,
            "response_type": self.response_type.value,
            "wall_time": self.wall_time,
            "trace_ref": self.trace_ref,
            "response": self.response,
            "gold": self.gold,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CaseResult":
        return cls(
            case_id=d["case_id"],
            task_id=d["task_id"],
            system=d["system"],
            f1=float(d["f1"]),
            response_type=ResponseType(d["response_type"]),
            wall_time=float(d.get("wall_time", 0.0)),
            trace_ref=d.get("trace_ref", ""),
            response=d.get("response"),
            gold=d.get("gold", ""),
        )


def score_trace(
    trace,
    case,
    system: str,
    match_threshold: float = DEFAULT_MATCH_THRESHOLD,
    trace_ref: str = "",
) -> CaseResult:
    f1 = token_f1(trace.response, case.gold) if trace.response is not None else 0.0
    return CaseResult(
        case_id=case.case_id,
        task_id=case.task_id,
        system=system,
        f1=f1,
        response_type=classify_response(trace, case.gold, match_threshold),
        wall_time=trace.wall_time,
        trace_ref=trace_ref,
        response=trace.response,
        gold=case.gold,
    )
