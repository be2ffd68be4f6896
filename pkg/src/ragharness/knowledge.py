"""Fixture-backed knowledge bases queried by the environment tools.

A fixture file is UTF-8 JSON Lines, one record per line::

    {"id": "p1", "kind": "Scholar",
     "attributes": {"name": "Yann Lecun", "organization": "New York University"},
     "relations": {}}

Article records may carry an extra ``sections`` key holding a list of
``[heading, body]`` pairs. See ``data/fixture.schema.json``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .text import normalize_text, normalize_tokens, render_value

DEFAULT_FUZZY_THRESHOLD = 0.5


class Domain(str, enum.Enum):
    WIKI = "wiki"
    AMINER = "aminer"


class RecordKind(str, enum.Enum):
    SCHOLAR = "Scholar"
    PUBLICATION = "Publication"
    ARTICLE = "Article"


class MatchMode(str, enum.Enum):
    FUZZY = "fuzzy"
    EXACT = "exact"


SCHOLAR_FIELDS = (
    "name",
    "organization",
    "interest",
    "gender",
    "position",
    "bio",
    "education",
    "email",
    "citation_count",
    "publication_count",
)
PUBLICATION_FIELDS = ("title", "year", "abstract", "citation_count")
ARTICLE_FIELDS = ("title", "abstract")

QUERYABLE_FIELDS = {
    RecordKind.SCHOLAR: frozenset(SCHOLAR_FIELDS),
    RecordKind.PUBLICATION: frozenset(PUBLICATION_FIELDS),
    RecordKind.ARTICLE: frozenset(ARTICLE_FIELDS),
}

PRIMARY_FIELD = {
    RecordKind.SCHOLAR: "name",
    RecordKind.PUBLICATION: "title",
    RecordKind.ARTICLE: "title",
}

DOMAIN_KINDS = {
    Domain.WIKI: frozenset({RecordKind.ARTICLE}),
    Domain.AMINER: frozenset({RecordKind.SCHOLAR, RecordKind.PUBLICATION}),
}


class KnowledgeError(Exception):
    pass


class UnreadablePath(KnowledgeError):
    pass


class MalformedRecord(KnowledgeError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class DanglingRelation(KnowledgeError):
    def __init__(self, source: str, target: str):
        super().__init__(f"record {source!r} points at missing record {target!r}")
        self.source = source
        self.target = target


class UnknownId(KnowledgeError, KeyError):
    def __str__(self):
        return f"unknown record id {self.args[0]!r}"


class UnknownField(KnowledgeError, ValueError):
    pass


@dataclass(frozen=True)
class KnowledgeRecord:
    id: str
    kind: RecordKind
    attributes: Mapping[str, object] = field(default_factory=dict)
    relations: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    sections: tuple[tuple[str, str], ...] = ()

    def get(self, key: str, default=None):
        return self.attributes.get(key, default)

    @property
    def primary_name(self) -> str:
        return render_value(self.attributes.get(PRIMARY_FIELD[self.kind], ""))


@dataclass(frozen=True)
class KnowledgeBase:
    domain: Domain
    records: Mapping[str, KnowledgeRecord]
    name_index: Mapping[str, tuple[str, ...]]
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def of_kind(self, kind: RecordKind) -> list[KnowledgeRecord]:
        return [r for r in self.records.values() if r.kind is kind]

    def referencing(self, relation: str, target_id: str) -> list[KnowledgeRecord]:
        """Records whose ``relation`` list contains ``target_id``, ascending id."""
        return sorted(
            (r for r in self.records.values() if target_id in r.relations.get(relation, ())),
            key=lambda r: r.id,
        )


def _check_value(value, line: int, key: str):
    if isinstance(value, bool) or value is None:
        raise MalformedRecord(line, f"attribute {key!r} must be text, number or list of text")
    if isinstance(value, (str, int, float)):
        return value
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    raise MalformedRecord(line, f"attribute {key!r} must be text, number or list of text")


def _parse_record(raw: str, line: int, domain: Domain) -> KnowledgeRecord:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedRecord(line, f"invalid JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise MalformedRecord(line, "record must be a JSON object")
    unknown = set(obj) - {"id", "kind", "attributes", "relations", "sections"}
    if unknown:
        raise MalformedRecord(line, f"unexpected keys {sorted(unknown)}")
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid:
        raise MalformedRecord(line, "id must be non-empty text")
    try:
        kind = RecordKind(obj.get("kind"))
    except ValueError:
        raise MalformedRecord(line, f"unknown kind {obj.get('kind')!r}") from None
    if kind not in DOMAIN_KINDS[domain]:
        raise MalformedRecord(line, f"kind {kind.value} not allowed in domain {domain.value}")
    attrs = obj.get("attributes", {})
    rels = obj.get("relations", {})
    if not isinstance(attrs, dict) or not isinstance(rels, dict):
        raise MalformedRecord(line, "attributes and relations must be objects")
    attributes = {k: _check_value(v, line, k) for k, v in attrs.items()}
    relations = {}
    for name, targets in rels.items():
        if not isinstance(targets, list) or not all(isinstance(t, str) for t in targets):
            raise MalformedRecord(line, f"relation {name!r} must be a list of ids")
        relations[name] = tuple(targets)
    sections: tuple[tuple[str, str], ...] = ()
    if "sections" in obj:
        if kind is not RecordKind.ARTICLE:
            raise MalformedRecord(line, "only Article records carry sections")
        secs = obj["sections"]
        if not isinstance(secs, list) or not all(
            isinstance(s, list) and len(s) == 2 and all(isinstance(p, str) for p in s) for s in secs
        ):
            raise MalformedRecord(line, "sections must be a list of [heading, body] pairs")
        sections = tuple((h, b) for h, b in secs)
    if not normalize_text(render_value(attributes.get(PRIMARY_FIELD[kind], "")) or ""):
        raise MalformedRecord(line, f"{kind.value} requires a {PRIMARY_FIELD[kind]!r} attribute")
    return KnowledgeRecord(
        id=rid,
        kind=kind,
        attributes=MappingProxyType(attributes),
        relations=MappingProxyType(relations),
        sections=sections,
    )


def build_knowledge_base(
    records: list[KnowledgeRecord],
    domain: Domain,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
) -> KnowledgeBase:
    by_id: dict[str, KnowledgeRecord] = {}
    for rec in records:
        if rec.id in by_id:
            raise KnowledgeError(f"duplicate record id {rec.id!r}")
        by_id[rec.id] = rec
    for rec in records:
        for relation, targets in rec.relations.items():
            for target in targets:
                if target not in by_id:
                    raise DanglingRelation(rec.id, target)
                if relation == "authors" and by_id[target].kind is not RecordKind.SCHOLAR:
                    raise KnowledgeError(f"{rec.id!r}: authors must point at Scholar records")
    index: dict[str, list[str]] = {}
    for rec in sorted(by_id.values(), key=lambda r: r.id):
        index.setdefault(normalize_text(rec.primary_name), []).append(rec.id)
    return KnowledgeBase(
        domain=domain,
        records=MappingProxyType(dict(sorted(by_id.items()))),
        name_index=MappingProxyType({k: tuple(v) for k, v in index.items()}),
        fuzzy_threshold=fuzzy_threshold,
    )


def load_knowledge_base(
    path: str | Path,
    domain: Domain | str,
    fuzzy_threshold: float = DEFAULT_FUZZY_THRESHOLD,
) -> KnowledgeBase:
    """Load a JSON Lines fixture into an indexed, immutable knowledge base.

    Blank lines are ignored; any other malformed line aborts the load.
    """
    domain = Domain(domain)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise UnreadablePath(f"cannot read fixture {path}: {exc}") from exc
    records = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        rec = _parse_record(raw, lineno, domain)
        if rec.id in seen:
            raise MalformedRecord(lineno, f"duplicate id {rec.id!r} (first on line {seen[rec.id]})")
        seen[rec.id] = lineno
        records.append(rec)
    return build_knowledge_base(records, domain, fuzzy_threshold)


def get_record(kb: KnowledgeBase, record_id: str) -> KnowledgeRecord:
    try:
        return kb.records[record_id]
    except (KeyError, TypeError):
        raise UnknownId(record_id) from None


def field_score(query: str, value) -> float:
    """Share of distinct query tokens that occur in the field value."""
    q = set(normalize_tokens(query))
    if not q:
        return 0.0
    f = set(normalize_tokens(render_value(value)))
    return len(q & f) / len(q)


def _exact_field(query: str, value) -> bool:
    target = normalize_text(query)
    if isinstance(value, tuple):
        if any(normalize_text(v) == target for v in value):
            return True
    return normalize_text(render_value(value)) == target


def find_records(
    kb: KnowledgeBase,
    query: Mapping[str, str],
    kind: RecordKind | str,
    mode: MatchMode | str = MatchMode.FUZZY,
    threshold: float | None = None,
) -> list[tuple[str, float]]:
    """Rank records of ``kind`` against a field-to-text query.

    Exact mode keeps records whose every queried field equals the query after
    normalization (score 1.0). Fuzzy mode scores the mean per-field token
    coverage and keeps scores at or above the threshold. Results are sorted by
    descending score, then ascending id.
    """
    kind = RecordKind(kind)
    mode = MatchMode(mode)
    if not query:
        raise UnknownField("query needs at least one field")
    bad = [k for k in query if k not in QUERYABLE_FIELDS[kind]]
    if bad:
        raise UnknownField(f"fields {bad} are not queryable on {kind.value}")
    items = [(k, str(v)) for k, v in query.items()]
    hits: list[tuple[str, float]] = []
    if mode is MatchMode.EXACT:
        candidates = kb.of_kind(kind)
        primary = PRIMARY_FIELD[kind]
        if primary in query:
            ids = kb.name_index.get(normalize_text(str(query[primary])), ())
            candidates = [kb.records[i] for i in ids if kb.records[i].kind is kind]
        for rec in candidates:
            if all(k in rec.attributes and _exact_field(v, rec.attributes[k]) for k, v in items):
                hits.append((rec.id, 1.0))
    else:
        cutoff = kb.fuzzy_threshold if threshold is None else threshold
        for rec in kb.of_kind(kind):
            score = sum(
                field_score(v, rec.attributes[k]) if k in rec.attributes else 0.0 for k, v in items
            ) / len(items)
            if score >= cutoff and score > 0.0:
                hits.append((rec.id, score))
    hits.sort(key=lambda h: (-h[1], h[0]))
    return hits
