"""PAL: the model writes one tool-call program, the harness runs it once.

Program grammar::

    program    := { line NEWLINE }
    line       := blank | comment | assign | final
    assign     := NAME "=" NAME "(" [ kwarg { "," kwarg } [","] ] ")" [comment]
    kwarg      := NAME "=" expr
    final      := "answer" "=" expr [comment]       (the last line, exactly once)
    expr       := STRING | NUMBER | NAME | NAME "." NAME | NAME "[" INT "]"
    comment    := "#" ...

Strings use double or single quotes with backslash escapes. Every variable is
bound once and read only after its binding; ``answer`` is reserved. A code
fence around the program is ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Union

from ..environment import EnvSession, FaultKind, FaultRecord, misuse
from ..gateway import ChatTurn, Role
from ..text import render_value
from .base import (
    MAX_PROGRAM_STATEMENTS,
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

ANSWER = "answer"


class ParseError(ValueError):
    def __init__(self, line: int, column: int, expected: str, found: str = ""):
        msg = f"line {line}, column {column}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)
        self.line = line
        self.column = column
        self.expected = expected


class UnboundVariable(ParseError):
    def __init__(self, line: int, column: int, name: str):
        super().__init__(line, column, f"a variable bound earlier (not {name!r})")
        self.name = name


class ProgramError(RuntimeError):
    """A well-formed program that cannot be evaluated (bad field, bad index)."""


@dataclass(frozen=True)
class Literal:
    value: Union[str, int, float]


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class FieldRef:
    name: str
    field: str


@dataclass(frozen=True)
class IndexRef:
    name: str
    index: int


Expr = Union[Literal, VarRef, FieldRef, IndexRef]


@dataclass(frozen=True)
class Assign:
    var: str
    tool: str
    arguments: tuple[tuple[str, Expr], ...]
    line: int


@dataclass(frozen=True)
class Program:
    statements: tuple[Assign, ...]
    final: Expr


_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#.*)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[=(),.\[\]])
    """,
    re.X,
)
_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "'": "'"}


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int


def _lex(line: str, lineno: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if m is None:
            raise ParseError(lineno, pos + 1, "a name, literal or one of = ( ) , . [ ]", line[pos])
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), pos + 1))
        pos = m.end()
    return toks


class _Line:
    def __init__(self, toks: list[_Tok], lineno: int, width: int):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.width = width

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, kind: str, text: str | None = None, expected: str = "") -> _Tok:
        tok = self.peek()
        if tok is None or tok.kind != kind or (text is not None and tok.text != text):
            want = expected or (repr(text) if text else kind)
            col = tok.col if tok else self.width + 1
            raise ParseError(self.lineno, col, want, tok.text if tok else "end of line")
        self.i += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "punct" and tok.text == text

    def end(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise ParseError(self.lineno, tok.col, "end of line", tok.text)


def _strip_fence(text: str) -> str:
    lines = text.strip("\n").split("\n")
    if lines and lines[0].strip().startswith("```"):
        lines = lines[1:]
        if lines and lines[-1].strip().startswith("```"):
            lines = lines[:-1]
    return "\n".join(lines)


def parse_program(text: str) -> Program:
    bound: set[str] = set()
    statements: list[Assign] = []
    final: Expr | None = None
    for lineno, raw in enumerate(_strip_fence(text).split("\n"), start=1):
        raw = raw.rstrip("\r")
        toks = _lex(raw, lineno)
        if not toks:
            continue
        if final is not None:
            raise ParseError(lineno, toks[0].col, "nothing after the answer line", toks[0].text)
        ln = _Line(toks, lineno, len(raw))
        target = ln.take("name", expected="a variable name")
        ln.take("punct", "=", expected="'='")
        if target.text == ANSWER:
            final = _expr(ln, bound)
            ln.end()
            continue
        if target.text in bound:
            raise ParseError(lineno, target.col, "a fresh variable name", target.text)
        tool = ln.take("name", expected="a tool name")
        ln.take("punct", "(", expected="'('")
        args: list[tuple[str, Expr]] = []
        seen: set[str] = set()
        while not ln.at(")"):
            key = ln.take("name", expected="a parameter name or ')'")
            if key.text in seen:
                raise ParseError(lineno, key.col, "a parameter not given before", key.text)
            seen.add(key.text)
            ln.take("punct", "=", expected="'='")
            args.append((key.text, _expr(ln, bound)))
            if not ln.at(")"):
                ln.take("punct", ",", expected="',' or ')'")
        ln.take("punct", ")")
        ln.end()
        if len(statements) == MAX_PROGRAM_STATEMENTS:
            raise ParseError(lineno, 1, f"at most {MAX_PROGRAM_STATEMENTS} tool lines")
        statements.append(Assign(target.text, tool.text, tuple(args), lineno))
        bound.add(target.text)
    if final is None:
        n = len(_strip_fence(text).split("\n"))
        raise ParseError(n, 1, "a final line 'answer = <expression>'")
    return Program(tuple(statements), final)


def _expr(ln: _Line, bound: set[str]) -> Expr:
    tok = ln.peek()
    if tok is None:
        raise ParseError(ln.lineno, ln.width + 1, "an expression", "end of line")
    if tok.kind == "string":
        ln.i += 1
        return Literal(_unescape(tok.text[1:-1]))
    if tok.kind == "number":
        ln.i += 1
        return Literal(float(tok.text) if "." in tok.text else int(tok.text))
    name = ln.take("name", expected="an expression")
    if name.text not in bound:
        raise UnboundVariable(ln.lineno, name.col, name.text)
    if ln.at("."):
        ln.i += 1
        attr = ln.take("name", expected="a field name")
        return FieldRef(name.text, attr.text)
    if ln.at("["):
        ln.i += 1
        idx = ln.take("number", expected="an integer index")
        if not re.fullmatch(r"-?\d+", idx.text):
            raise ParseError(ln.lineno, idx.col, "an integer index", idx.text)
        ln.take("punct", "]", expected="']'")
        return IndexRef(name.text, int(idx.text))
    return VarRef(name.text)


# -- evaluation ---------------------------------------------------------------


def evaluate(expr: Expr, env: dict[str, Any]) -> Any:
    if isinstance(expr, Literal):
        return expr.value
    value = env[expr.name]
    if isinstance(expr, VarRef):
        return value
    if isinstance(expr, IndexRef):
        if not isinstance(value, list):
            raise ProgramError(f"{expr.name} is not a list")
        try:
            return value[expr.index]
        except IndexError:
            raise ProgramError(f"{expr.name}[{expr.index}] is out of range ({len(value)} items)") from None
    # field access on a result list reads its first row
    row = value[0] if isinstance(value, list) and value and isinstance(value[0], dict) else value
    if not isinstance(row, dict) or expr.field not in row:
        raise ProgramError(f"{expr.name} has no field {expr.field!r}")
    return row[expr.field]


def as_text(value: Any) -> str:
    if isinstance(value, dict):
        return "\n".join(f"{k}: {render_value(v)}" for k, v in value.items())
    if isinstance(value, list) and any(isinstance(v, dict) for v in value):
        return "\n\n".join(as_text(v) for v in value)
    return render_value(value)


def run_pal(
    config: SystemConfig,
    session: EnvSession,
    case,
    example: OneShotExample,
    llm: ModelClient | None = None,
) -> WorkflowTrace:
    """One completion, one execution; any fault ends the trace."""
    if config.workflow is not Workflow.PAL:
        raise ValueError(f"run_pal got a {config.workflow.value} system")
    client = CountingClient(llm or model_client(config.model))
    prompt = render_prompt(
        Workflow.PAL,
        session.domain,
        tools=session.list_tools(),
        example=example,
        question=case.question,
        prompt_set=config.prompt_set,
    )
    steps: list[Step] = []

    def done(**kw):
        return WorkflowTrace(Workflow.PAL, tuple(steps), completions=client.calls, **kw)

    try:
        reply = client([ChatTurn(Role.USER, prompt)])
    except MODEL_ERRORS as exc:
        return done(interruption=model_fault(exc))
    try:
        program = parse_program(reply.content)
    except ParseError as exc:
        return done(interruption=FaultRecord(FaultKind.TOOL_MISUSE, f"program rejected: {exc}"), meta={"program": reply.content})
    meta = {"program": reply.content}
    env: dict[str, Any] = {}
    for stmt in program.statements:
        try:
            args = {k: as_text(evaluate(e, env)) for k, e in stmt.arguments}
        except ProgramError as exc:
            steps.append(Step(None, None, misuse(f"line {stmt.line}: {exc}")))
            return done(interruption=FaultRecord(FaultKind.TOOL_MISUSE, f"line {stmt.line}: {exc}"), meta=meta)
        call, obs = session.call(stmt.tool, args)
        steps.append(Step(None, call, obs))
        if obs.fault is not None:
            return done(interruption=obs.fault, meta=meta)
        env[stmt.var] = obs.structured if obs.structured is not None else obs.text
    try:
        response = as_text(evaluate(program.final, env))
    except ProgramError as exc:
        return done(interruption=FaultRecord(FaultKind.TOOL_MISUSE, f"answer: {exc}"), meta=meta)
    return done(response=response, meta=meta)
