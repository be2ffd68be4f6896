"""Uniform model access: chat-completions client, scripted replay, response cache."""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
import urllib.error
import urllib.request
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from .environment import ToolSpec

log = logging.getLogger(__name__)

FC_MODELS = frozenset({"gpt-4-1106", "gpt-3.5-turbo"})
DEFAULT_RETRIES = 2


class GatewayError(Exception):
    pass


class TransportError(GatewayError):
    pass


class ProtocolError(GatewayError):
    pass


class ScriptExhausted(GatewayError):
    pass


class MalformedScript(GatewayError):
    pass


class UnreadablePath(GatewayError):
    pass


class CacheCorrupt(GatewayError):
    pass


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.0
    max_new_tokens: int = 128
    max_length: int = 2048
    num_beams: int = 1
    do_sample: bool = False
    stop_sequences: tuple[str, ...] = ("</s>",)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stop_sequences"] = list(self.stop_sequences)
        return d


class ModelKind(str, enum.Enum):
    REMOTE = "remote"
    SCRIPTED = "scripted"


@dataclass(frozen=True)
class ModelRef:
    id: str
    kind: ModelKind = ModelKind.REMOTE
    location: str = ""
    supports_native_function_calls: bool | None = None
    # environment variable holding the API key; the key itself is never stored
    api_key_env: str | None = None
    # drop wire fields a strict OpenAI endpoint rejects (max_length, num_beams, do_sample)
    openai_strict: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        fc = self.supports_native_function_calls
        if fc is None:
            object.__setattr__(self, "supports_native_function_calls", self.id in FC_MODELS)
        elif fc and self.id not in FC_MODELS and self.kind is not ModelKind.REMOTE:
            raise ValueError(f"only remote models may declare native function calls ({self.id})")


class Role(str, enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"


@dataclass(frozen=True)
class ToolCallRequest:
    name: str
    # None when the model's argument payload could not be decoded
    arguments: Mapping[str, Any] | None
    raw_arguments: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "arguments": None if self.arguments is None else dict(self.arguments),
            "raw_arguments": self.raw_arguments,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ToolCallRequest":
        args = d.get("arguments")
        return cls(d["name"], None if args is None else dict(args), d.get("raw_arguments", ""))


@dataclass(frozen=True)
class ChatTurn:
    role: Role
    content: str = ""
    tool_call: ToolCallRequest | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.tool_call is not None and self.role is not Role.ASSISTANT:
            raise ValueError("tool_call is only allowed on assistant turns")

    def to_dict(self) -> dict:
        d = {"role": self.role.value, "content": self.content}
        if self.tool_call is not None:
            d["tool_call"] = self.tool_call.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ChatTurn":
        tc = d.get("tool_call")
        return cls(Role(d["role"]), d.get("content") or "", ToolCallRequest.from_dict(tc) if tc else None)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def turns_digest(turns: Sequence[ChatTurn]) -> str:
    """Key used by keyed scripts: sha256 hex of the canonical JSON turn list."""
    return hashlib.sha256(canonical_json([t.to_dict() for t in turns]).encode("utf-8")).hexdigest()


def truncate_reply(text: str, params: GenerationParams) -> str:
    """Cut at the first stop sequence, then keep at most ``max_new_tokens`` words."""
    for stop in params.stop_sequences:
        if stop and stop in text:
            text = text[: text.index(stop)]
    words = list(re.finditer(r"\S+", text))
    if len(words) > params.max_new_tokens:
        text = text[: words[params.max_new_tokens - 1].end()]
    return text


# -- scripted models --------------------------------------------------------


def _parse_reply(obj: Any, where: str) -> ChatTurn:
    if isinstance(obj, str):
        return ChatTurn(Role.ASSISTANT, obj)
    if isinstance(obj, dict) and set(obj) <= {"content", "tool_call"}:
        tc = obj.get("tool_call")
        req = None
        if tc is not None:
            if not isinstance(tc, dict) or not isinstance(tc.get("name"), str):
                raise MalformedScript(f"{where}: tool_call needs a name")
            args = tc.get("arguments")
            if args is not None and not isinstance(args, dict):
                raise MalformedScript(f"{where}: tool_call arguments must be an object or null")
            req = ToolCallRequest(tc["name"], args, tc.get("raw_arguments", "" if args is None else canonical_json(args)))
        content = obj.get("content") or ""
        if not isinstance(content, str):
            raise MalformedScript(f"{where}: content must be text")
        return ChatTurn(Role.ASSISTANT, content, req)
    raise MalformedScript(f"{where}: reply must be text or {{content, tool_call}}")


@dataclass
class Script:
    """Parsed script file.

    Accepted layouts (JSON): a list of replies; ``{"replies": [...]}``;
    ``{"keyed": {digest: reply}}``; ``{"cases": {case_id: [...]}}``. A reply is a
    string or ``{"content": ..., "tool_call": {"name": ..., "arguments": {...}}}``.
    """

    replies: list[ChatTurn] = field(default_factory=list)
    keyed: dict[str, ChatTurn] = field(default_factory=dict)
    cases: dict[str, list[ChatTurn]] = field(default_factory=dict)

    @classmethod
    def from_obj(cls, obj: Any) -> "Script":
        if isinstance(obj, list):
            obj = {"replies": obj}
        if not isinstance(obj, dict) or not set(obj) <= {"replies", "keyed", "cases", "model"}:
            raise MalformedScript("script must be a list or an object with replies/keyed/cases")
        replies = obj.get("replies", [])
        keyed = obj.get("keyed", {})
        cases = obj.get("cases", {})
        if not isinstance(replies, list) or not isinstance(keyed, dict) or not isinstance(cases, dict):
            raise MalformedScript("replies must be a list, keyed and cases objects")
        out = cls()
        out.replies = [_parse_reply(r, f"replies[{i}]") for i, r in enumerate(replies)]
        out.keyed = {k: _parse_reply(v, f"keyed[{k}]") for k, v in keyed.items()}
        for cid, seq in cases.items():
            if not isinstance(seq, list):
                raise MalformedScript(f"cases[{cid}] must be a list")
            out.cases[cid] = [_parse_reply(r, f"cases[{cid}][{i}]") for i, r in enumerate(seq)]
        return out


class ScriptedModel:
    """Replays a script. Keyed entries win over the ordered cursor."""

    def __init__(self, script: Script, model_id: str = "scripted"):
        self.script = script
        self.model_id = model_id
        self._queue: list[ChatTurn] = list(script.replies)
        self._pos = 0
        self.calls = 0
        self.prompts: list[list[ChatTurn]] = []

    def for_case(self, case_id: str) -> "ScriptedModel":
        """Fresh replay for one case, using its per-case list when present."""
        fresh = ScriptedModel(self.script, self.model_id)
        if case_id in self.script.cases:
            fresh._queue = list(self.script.cases[case_id])
        return fresh

    def next_reply(self, turns: Sequence[ChatTurn]) -> ChatTurn:
        self.calls += 1
        self.prompts.append(list(turns))
        if self.script.keyed:
            hit = self.script.keyed.get(turns_digest(turns))
            if hit is not None:
                return hit
        if self._pos >= len(self._queue):
            raise ScriptExhausted(f"script for {self.model_id} has no reply #{self._pos + 1}")
        reply = self._queue[self._pos]
        self._pos += 1
        return reply


_SCRIPTS: dict[str, ScriptedModel] = {}
_SCRIPTS_LOCK = threading.Lock()


def read_script(path: str | Path) -> Script:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadablePath(f"cannot read script {path}: {exc}") from exc
    try:
        obj = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise MalformedScript(f"{path}: invalid JSON ({exc.msg})") from None
    return Script.from_obj(obj)


def load_script(path: str | Path, model_id: str | None = None) -> ModelRef:
    """Register a script file and return a Scripted ``ModelRef`` replaying it."""
    script = read_script(path)
    ref = ModelRef(model_id or Path(path).stem, ModelKind.SCRIPTED, str(path))
    with _SCRIPTS_LOCK:
        _SCRIPTS[_script_key(ref)] = ScriptedModel(script, ref.id)
    return ref


def _script_key(ref: ModelRef) -> str:
    return f"{ref.id}|{ref.location}"


def scripted_backend(ref: ModelRef) -> ScriptedModel:
    with _SCRIPTS_LOCK:
        backend = _SCRIPTS.get(_script_key(ref))
        if backend is None:
            backend = ScriptedModel(read_script(ref.location), ref.id)
            _SCRIPTS[_script_key(ref)] = backend
        return backend


# -- remote models ----------------------------------------------------------


class Transport:
    """HTTP JSON POST with an operation counter (for no-network assertions)."""

    def __init__(self, timeout: float = 60.0):
        self.timeout = timeout
        self.operations = 0
        self._lock = threading.Lock()

    def post_json(self, url: str, body: Mapping, headers: Mapping[str, str] | None = None) -> Any:
        with self._lock:
            self.operations += 1
        data = json.dumps(body).encode("utf-8")
        req = urllib.request.Request(url, data=data, method="POST")
        req.add_header("Content-Type", "application/json")
        for k, v in (headers or {}).items():
            req.add_header(k, v)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = resp.read()
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"POST {url} failed: {exc}") from exc
        try:
            return json.loads(payload)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ProtocolError(f"reply from {url} is not JSON") from exc


DEFAULT_TRANSPORT = Transport()


def _wire_message(turn: ChatTurn) -> dict:
    msg: dict[str, Any] = {"role": turn.role.value, "content": turn.content}
    if turn.tool_call is not None:
        msg["tool_calls"] = [
            {
                "type": "function",
                "function": {
                    "name": turn.tool_call.name,
                    "arguments": turn.tool_call.raw_arguments
                    or canonical_json(dict(turn.tool_call.arguments or {})),
                },
            }
        ]
    return msg


def request_body(
    model: ModelRef,
    turns: Sequence[ChatTurn],
    params: GenerationParams,
    tool_specs: Sequence[ToolSpec] | None = None,
) -> dict:
    """Chat-completions request body for ``model``."""
    body: dict[str, Any] = {
        "model": model.id,
        "messages": [_wire_message(t) for t in turns],
        "temperature": params.temperature,
        "max_tokens": params.max_new_tokens,
        "stop": list(params.stop_sequences),
    }
    if not model.openai_strict:
        body.update(max_length=params.max_length, num_beams=params.num_beams, do_sample=params.do_sample)
    if tool_specs:
        body["tools"] = [s.to_schema() for s in tool_specs]
    return body


def parse_reply_body(payload: Any) -> ChatTurn:
    try:
        message = payload["choices"][0]["message"]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError("reply lacks choices[0].message") from None
    if not isinstance(message, dict):
        raise ProtocolError("choices[0].message must be an object")
    content = message.get("content") or ""
    if not isinstance(content, str):
        raise ProtocolError("message content must be text")
    calls = message.get("tool_calls") or []
    if not isinstance(calls, list):
        raise ProtocolError("tool_calls must be a list")
    req = None
    if calls:
        fn = calls[0].get("function") if isinstance(calls[0], dict) else None
        if not isinstance(fn, dict) or not isinstance(fn.get("name"), str):
            raise ProtocolError("tool call lacks function.name")
        raw = fn.get("arguments", "")
        if isinstance(raw, dict):
            args, raw = raw, canonical_json(raw)
        else:
            try:
                args = json.loads(raw) if raw else {}
            except (json.JSONDecodeError, TypeError):
                args = None
            if not isinstance(args, dict):
                args = None
        req = ToolCallRequest(fn["name"], args, raw if isinstance(raw, str) else "")
    return ChatTurn(Role.ASSISTANT, content, req)


def _remote_complete(model, turns, params, tool_specs, transport, retries, backoff):
    headers = {}
    if model.api_key_env:
        key = os.environ.get(model.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
    body = request_body(model, turns, params, tool_specs)
    for attempt in range(retries + 1):
        try:
            return parse_reply_body(transport.post_json(model.location, body, headers))
        except TransportError:
            if attempt == retries:
                raise
            delay = backoff * (2**attempt)
            log.warning("transport error for %s, retry %d in %.2fs", model.id, attempt + 1, delay)
            if delay:
                time.sleep(delay)
    raise AssertionError("unreachable")


def complete(
    model: ModelRef,
    turns: Sequence[ChatTurn],
    params: GenerationParams | None = None,
    tool_specs: Sequence[ToolSpec] | None = None,
    *,
    transport: Transport | None = None,
    backend: ScriptedModel | None = None,
    retries: int = DEFAULT_RETRIES,
    backoff: float = 0.5,
) -> ChatTurn:
    """One assistant turn from ``model``.

    ``backend`` overrides the registered replay for scripted models (the runner
    passes a per-case replay). Stop sequences and ``max_new_tokens`` are applied
    to the content of every reply, scripted or remote.
    """
    if not turns:
        raise ValueError("turns must not be empty")
    params = params or GenerationParams()
    if model.kind is ModelKind.SCRIPTED:
        reply = (backend or scripted_backend(model)).next_reply(turns)
    else:
        reply = _remote_complete(
            model, turns, params, tool_specs, transport or DEFAULT_TRANSPORT, retries, backoff
        )
    if not tool_specs and reply.tool_call is not None:
        reply = ChatTurn(Role.ASSISTANT, reply.content)
    return ChatTurn(Role.ASSISTANT, truncate_reply(reply.content, params), reply.tool_call)


# -- cache ------------------------------------------------------------------


def cache_key(
    model: ModelRef,
    turns: Sequence[ChatTurn],
    params: GenerationParams,
    tool_specs: Sequence[ToolSpec] | None = None,
) -> str:
    blob = canonical_json(
        {
            "model": model.id,
            "turns": [t.to_dict() for t in turns],
            "params": params.to_dict(),
            "tools": [s.to_schema() for s in tool_specs or ()],
        }
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _cache_path(cache_dir: Path, key: str) -> Path:
    return cache_dir / key[:2] / f"{key}.json"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cached_complete(
    cache_dir: str | Path,
    model: ModelRef,
    turns: Sequence[ChatTurn],
    params: GenerationParams | None = None,
    tool_specs: Sequence[ToolSpec] | None = None,
    **kwargs,
) -> ChatTurn:
    """Read-through cache in front of :func:`complete`.

    Entries are content-addressed files ``<cache_dir>/<k[:2]>/<k>.json`` written
    by atomic rename, so concurrent writers never leave torn entries.
    """
    params = params or GenerationParams()
    key = cache_key(model, turns, params, tool_specs)
    path = _cache_path(Path(cache_dir), key)
    if path.exists():
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            if entry.get("key") != key:
                raise CacheCorrupt(f"{path}: key mismatch")
            return ChatTurn.from_dict(entry["turn"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CacheCorrupt(f"{path}: {exc}") from exc
    turn = complete(model, turns, params, tool_specs, **kwargs)
    _write_atomic(path, canonical_json({"key": key, "turn": turn.to_dict()}))
    return turn


def is_model_fault(exc: BaseException) -> bool:
    return isinstance(exc, (TransportError, ProtocolError, ScriptExhausted, CacheCorrupt))


__all__ = [
    "CacheCorrupt",
    "ChatTurn",
    "GenerationParams",
    "MalformedScript",
    "ModelKind",
    "ModelRef",
    "ProtocolError",
    "Role",
    "ScriptExhausted",
    "ScriptedModel",
    "ToolCallRequest",
    "Transport",
    "TransportError",
    "cache_key",
    "cached_complete",
    "complete",
    "load_script",
    "request_body",
    "turns_digest",
]

