"""Interactive tool surface over a knowledge base.

Model mistakes never raise here: a bad call comes back as an ``Observation``
carrying a ``FaultRecord`` so the workflow (and later the classifier) can see
it. Only harness bugs raise.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .knowledge import (
    Domain,
    KnowledgeBase,
    MatchMode,
    RecordKind,
    find_records,
)
from .text import normalize_text, render_value

DEFAULT_SEARCH_CAP = 3
RELATED_CAP = 5
NO_MORE_RESULTS = "No more results."


class FaultKind(str, enum.Enum):
    TOOL_MISUSE = "ToolMisuse"
    TOOL_INTERNAL_FAULT = "ToolInternalFault"
    # raised by workflows, never by the environment
    MODEL_FAULT = "ModelFault"


@dataclass(frozen=True)
class FaultRecord:
    kind: FaultKind
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "detail": self.detail}

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "FaultRecord | None":
        if d is None:
            return None
        return cls(FaultKind(d["kind"]), d["detail"])


@dataclass(frozen=True)
class ToolParam:
    name: str
    type: str
    required: bool = True
    description: str = ""


@dataclass(frozen=True)
class ToolSpec:
    name: str
    domain: Domain
    parameters: tuple[ToolParam, ...]
    description: str
    returns: str

    def to_schema(self) -> dict:
        """Function schema in chat-completions ``tools[]`` layout."""
        props = {p.name: {"type": "string", "description": p.description} for p in self.parameters}
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": f"{self.description} Returns {self.returns}",
                "parameters": {
                    "type": "object",
                    "properties": props,
                    "required": [p.name for p in self.parameters if p.required],
                },
            },
        }

    def signature(self) -> str:
        args = ", ".join(p.name + ("" if p.required else "?") for p in self.parameters)
        return f"{self.name}({args})"


@dataclass(frozen=True)
class ToolCall:
    tool: str
    arguments: Mapping[str, Any]
    ordinal: int

    def to_dict(self) -> dict:
        return {"tool": self.tool, "arguments": dict(self.arguments), "ordinal": self.ordinal}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ToolCall":
        return cls(d["tool"], dict(d["arguments"]), d["ordinal"])


@dataclass(frozen=True)
class Observation:
    text: str = ""
    structured: Any = None
    fault: FaultRecord | None = None

    def __post_init__(self):
        if (self.fault is None) == (not self.text):
            raise ValueError("an observation has either non-empty text or a fault, not both")

    @property
    def ok(self) -> bool:
        return self.fault is None

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "structured": self.structured,
            "fault": self.fault.to_dict() if self.fault else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Observation":
        return cls(d.get("text") or "", d.get("structured"), FaultRecord.from_dict(d.get("fault")))

    def render(self) -> str:
        """Text shown to a model: the result, or the fault as an error line."""
        if self.fault is not None:
            return f"Error: {self.fault.detail}"
        return self.text


def misuse(detail: str) -> Observation:
    return Observation(fault=FaultRecord(FaultKind.TOOL_MISUSE, detail))


def internal_fault(detail: str) -> Observation:
    return Observation(fault=FaultRecord(FaultKind.TOOL_INTERNAL_FAULT, detail))


def _p(name, desc, required=True):
    return ToolParam(name, "text", required, desc)


WIKI_TOOLS = (
    ToolSpec(
        "Search",
        Domain.WIKI,
        (_p("entity", "name of the entity to look up"),),
        "Search an entity page by name.",
        "the page abstract, or a list of similar entity names when there is no match.",
    ),
    ToolSpec(
        "Lookup",
        Domain.WIKI,
        (_p("keyword", "keyword to find in the last searched page"),),
        "Find the next sentence containing the keyword in the page found by the last Search.",
        "one sentence per call, or 'No more results.'.",
    ),
    ToolSpec(
        "Finish",
        Domain.WIKI,
        (_p("answer", "the final answer"),),
        "Stop searching and give the final answer.",
        "the answer.",
    ),
)

AMINER_TOOLS = (
    ToolSpec(
        "searchPerson",
        Domain.AMINER,
        (
            _p("name", "scholar name"),
            _p("organization", "affiliation of the scholar", False),
            _p("interest", "a research interest of the scholar", False),
        ),
        "Search scholars by name, organization and interest.",
        "matching scholars with id, name, organization, interest, citation number and publication number.",
    ),
    ToolSpec(
        "searchPublication",
        Domain.AMINER,
        (_p("title", "publication title or part of it"),),
        "Search publications by title.",
        "matching publications with id, title and year.",
    ),
    ToolSpec(
        "getCoauthors",
        Domain.AMINER,
        (_p("id", "scholar id"),),
        "List the coauthors of a scholar.",
        "coauthors with id, name and relation.",
    ),
    ToolSpec(
        "getPersonInterest",
        Domain.AMINER,
        (_p("id", "scholar id"),),
        "Get the research interests of a scholar.",
        "the list of interests.",
    ),
    ToolSpec(
        "getPublication",
        Domain.AMINER,
        (_p("id", "publication id"),),
        "Get details of a publication.",
        "abstract, author list and citation number.",
    ),
    ToolSpec(
        "getPersonBasicInfo",
        Domain.AMINER,
        (_p("id", "scholar id"),),
        "Get the profile of a scholar.",
        "name, gender, organization, position, bio, education and email.",
    ),
    ToolSpec(
        "getPersonPubs",
        Domain.AMINER,
        (_p("id", "scholar id"),),
        "List the publications of a scholar.",
        "publications with id, title, citation number and authors.",
    ),
)

TOOLSETS = {Domain.WIKI: WIKI_TOOLS, Domain.AMINER: AMINER_TOOLS}


def tools_for(domain: Domain | str) -> tuple[ToolSpec, ...]:
    return TOOLSETS[Domain(domain)]


def render_fields(pairs: Iterable[tuple[str, Any]]) -> str:
    return "\n".join(f"{k}: {render_value(v)}" for k, v in pairs)


def render_blocks(rows: list[dict]) -> str:
    return "\n\n".join(render_fields(r.items()) for r in rows)


_SENTENCE_SPLIT = re.compile(r"(?<=[.?!])\s+")


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]


@dataclass
class LookupState:
    article_id: str
    sentences: list[str]
    cursors: dict[str, int] = field(default_factory=dict)


class EnvSession:
    """Per-case tool session. Not thread-safe; open one per trace."""

    def __init__(
        self,
        kb: KnowledgeBase,
        fault_plan: Iterable[int] | None = None,
        search_cap: int = DEFAULT_SEARCH_CAP,
    ):
        self.kb = kb
        self.domain = kb.domain
        self.fault_plan = frozenset(fault_plan or ())
        self.search_cap = search_cap
        self.lookup_state: LookupState | None = None
        self.call_log: list[tuple[ToolCall, Observation]] = []
        self.finished = False
        self._specs = {s.name: s for s in tools_for(self.domain)}
        self._handlers: dict[str, Callable[[Mapping[str, str]], Observation]] = {
            "Search": self._search,
            "Lookup": self._lookup,
            "Finish": self._finish,
            "searchPerson": self._search_person,
            "searchPublication": self._search_publication,
            "getCoauthors": self._coauthors,
            "getPersonInterest": self._interest,
            "getPublication": self._publication,
            "getPersonBasicInfo": self._basic_info,
            "getPersonPubs": self._person_pubs,
        }

    def list_tools(self) -> list[ToolSpec]:
        return list(tools_for(self.domain))

    @property
    def next_ordinal(self) -> int:
        return len(self.call_log) + 1

    def call(self, tool: str, arguments: Any) -> tuple[ToolCall, Observation]:
        """Invoke ``tool`` at the next ordinal and return the logged pair."""
        args = dict(arguments) if isinstance(arguments, Mapping) else arguments
        call = ToolCall(tool, args if isinstance(args, dict) else {"__raw__": args}, self.next_ordinal)
        if not isinstance(args, dict):
            obs = misuse(f"arguments for {tool} must be a key/value map")
            self.call_log.append((call, obs))
            return call, obs
        return call, self.invoke(call)

    def invoke(self, call: ToolCall) -> Observation:
        if call.ordinal != self.next_ordinal:
            raise ValueError(f"expected ordinal {self.next_ordinal}, got {call.ordinal}")
        obs = self._dispatch(call)
        self.call_log.append((call, obs))
        return obs

    def _validate(self, call: ToolCall) -> str | None:
        if self.finished:
            return "the session is finished; no further calls are accepted"
        spec = self._specs.get(call.tool) if isinstance(call.tool, str) else None
        if spec is None:
            known = ", ".join(self._specs)
            return f"unknown tool {call.tool!r}; available tools: {known}"
        if not isinstance(call.arguments, Mapping):
            return f"arguments for {spec.name} must be a key/value map"
        names = {p.name for p in spec.parameters}
        extra = sorted(str(k) for k in call.arguments if k not in names)
        if extra:
            return f"{spec.name} got unexpected arguments {extra}; signature is {spec.signature()}"
        for p in spec.parameters:
            if p.name not in call.arguments:
                if p.required:
                    return f"{spec.name} is missing required argument {p.name!r}"
                continue
            value = call.arguments[p.name]
            if not isinstance(value, str):
                return f"{spec.name} argument {p.name!r} must be text, got {type(value).__name__}"
            if not value.strip() and p.name != "answer":
                return f"{spec.name} argument {p.name!r} must not be empty"
        if spec.name == "Lookup":
            if self.lookup_state is None:
                return "Lookup requires a successful Search first"
            if not normalize_text(call.arguments["keyword"]):
                return "Lookup keyword has no searchable characters"
        return None

    def _dispatch(self, call: ToolCall) -> Observation:
        problem = self._validate(call)
        if problem:
            return misuse(problem)
        if call.ordinal in self.fault_plan:
            return internal_fault(f"{call.tool} failed: injected fault at call {call.ordinal}")
        try:
            return self._handlers[call.tool](call.arguments)
        except Exception as exc:  # tool bug, surfaced in-band
            return internal_fault(f"{call.tool} failed: {type(exc).__name__}: {exc}")

    # -- wiki ---------------------------------------------------------------

    def _search(self, args):
        entity = args["entity"]
        exact = find_records(self.kb, {"title": entity}, RecordKind.ARTICLE, MatchMode.EXACT)
        fuzzy = find_records(self.kb, {"title": entity}, RecordKind.ARTICLE, MatchMode.FUZZY)
        hit = exact[0][0] if exact else (fuzzy[0][0] if fuzzy and fuzzy[0][1] == 1.0 else None)
        if hit is None:
            similar = [self.kb.records[i].primary_name for i, _ in fuzzy[:RELATED_CAP]]
            if similar:
                text = f'Could not find "{entity}". Similar: ' + "; ".join(similar)
            else:
                text = f'Could not find "{entity}". No similar entities.'
            return Observation(text, {"found": False, "similar": similar})
        rec = self.kb.records[hit]
        sentences = [s for _, body in rec.sections for s in split_sentences(body)]
        self.lookup_state = LookupState(rec.id, sentences)
        abstract = render_value(rec.get("abstract")) or rec.primary_name
        return Observation(abstract, {"found": True, "id": rec.id, "title": rec.primary_name, "abstract": abstract})

    def _lookup(self, args):
        keyword = normalize_text(args["keyword"])
        st = self.lookup_state
        matches = [s for s in st.sentences if keyword in normalize_text(s)]
        pos = st.cursors.get(keyword, 0)
        if pos >= len(matches):
            return Observation(NO_MORE_RESULTS, None)
        st.cursors[keyword] = pos + 1
        sentence = matches[pos]
        return Observation(
            f"(Result {pos + 1} / {len(matches)}) {sentence}",
            {"sentence": sentence, "index": pos + 1, "total": len(matches)},
        )

    def _finish(self, args):
        self.finished = True
        answer = args["answer"]
        return Observation(f"Answer: {answer}", {"answer": answer})

    # -- aminer -------------------------------------------------------------

    def _scholar(self, rid):
        rec = self.kb.records.get(rid)
        return rec if rec is not None and rec.kind is RecordKind.SCHOLAR else None

    def _not_found(self, what, rid):
        return Observation(f"No {what} with id {rid!r}.", None)

    def _pubs_of(self, pid):
        return self.kb.referencing("authors", pid)

    def _author_names(self, pub):
        return [self.kb.records[a].primary_name for a in pub.relations.get("authors", ())]

    def _search_person(self, args):
        query = {k: args[k] for k in ("name", "organization", "interest") if k in args}
        hits = find_records(self.kb, query, RecordKind.SCHOLAR, MatchMode.FUZZY)[: self.search_cap]
        rows = []
        for rid, _ in hits:
            rec = self.kb.records[rid]
            rows.append(
                {
                    "id": rec.id,
                    "name": rec.primary_name,
                    "organization": rec.get("organization", "unknown"),
                    "interest": list(rec.get("interest", ())),
                    "citation_number": rec.get("citation_count", 0),
                    "publication_number": rec.get("publication_count", 0),
                }
            )
        if not rows:
            return Observation("No matching person.", [])
        return Observation(render_blocks(rows), rows)

    def _search_publication(self, args):
        hits = find_records(self.kb, {"title": args["title"]}, RecordKind.PUBLICATION)[: self.search_cap]
        rows = []
        for rid, _ in hits:
            rec = self.kb.records[rid]
            rows.append({"id": rec.id, "title": rec.primary_name, "year": rec.get("year", "unknown")})
        if not rows:
            return Observation("No matching publication.", [])
        return Observation(render_blocks(rows), rows)

    def _coauthors(self, args):
        rec = self._scholar(args["id"])
        if rec is None:
            return self._not_found("person", args["id"])
        ids = sorted(
            {a for pub in self._pubs_of(rec.id) for a in pub.relations["authors"] if a != rec.id},
            key=_natural_key,
        )
        rows = [{"id": i, "name": self.kb.records[i].primary_name, "relation": "coauthor"} for i in ids]
        if not rows:
            return Observation("No coauthors.", [])
        return Observation(render_blocks(rows), rows)

    def _interest(self, args):
        rec = self._scholar(args["id"])
        if rec is None:
            return self._not_found("person", args["id"])
        interests = list(rec.get("interest", ()))
        return Observation(render_fields([("interest", interests or "unknown")]), interests)

    def _publication(self, args):
        rec = self.kb.records.get(args["id"])
        if rec is None or rec.kind is not RecordKind.PUBLICATION:
            return self._not_found("publication", args["id"])
        row = {
            "id": rec.id,
            "title": rec.primary_name,
            "year": rec.get("year", "unknown"),
            "abstract": rec.get("abstract", "unknown"),
            "authors": self._author_names(rec),
            "citation_number": rec.get("citation_count", 0),
        }
        return Observation(render_fields(row.items()), row)

    def _basic_info(self, args):
        rec = self._scholar(args["id"])
        if rec is None:
            return self._not_found("person", args["id"])
        row = {"id": rec.id}
        for key in ("name", "gender", "organization", "position", "bio", "education", "email"):
            row[key] = rec.get(key, "unknown")
        return Observation(render_fields(row.items()), row)

    def _person_pubs(self, args):
        rec = self._scholar(args["id"])
        if rec is None:
            return self._not_found("person", args["id"])
        rows = [
            {
                "id": pub.id,
                "title": pub.primary_name,
                "citation_number": pub.get("citation_count", 0),
                "authors": self._author_names(pub),
            }
            for pub in sorted(self._pubs_of(rec.id), key=lambda p: _natural_key(p.id))
        ]
        if not rows:
            return Observation("No publications.", [])
        return Observation(render_blocks(rows), rows)


def _natural_key(rid: str):
    m = re.match(r"^(\D*)(\d+)$", rid)
    return (m.group(1), int(m.group(2)), "") if m else (rid, -1, rid)


def open_session(
    kb: KnowledgeBase,
    fault_plan: Iterable[int] | None = None,
    search_cap: int = DEFAULT_SEARCH_CAP,
) -> EnvSession:
    return EnvSession(kb, fault_plan, search_cap)


def list_tools(session: EnvSession) -> list[ToolSpec]:
    return session.list_tools()


def invoke(session: EnvSession, call: ToolCall) -> Observation:
    return session.invoke(call)
