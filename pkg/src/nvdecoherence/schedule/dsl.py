"""
Line-oriented text format for pulse schedules.

::

    # amplification cycle
    dim 3
    dt 0.01
    param lambda 2
    repeat 100 { sys on dt; sys off lambda*dt }

Declarations (``dim``, ``dt``, ``param``) come first. Statements are
``sys on|off <expr>``, ``gate <i> <j>`` with 1-based level labels, and
``repeat <n> { ... }``. Statements are separated by ``;`` or newlines and
``#`` starts a comment. Expressions use + - * / and parentheses over
numbers, declared parameters and ``dt``.

A program made of a single top-level ``repeat`` becomes a schedule whose
cycle is the (flattened) loop body; anything else is one cycle run once.
Spacing parameters ``tau``, ``tau1``, ``tau2`` imply ``mu = tau*lambda/2``
(and ``mu1``, ``mu2``) unless those are declared explicitly.
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass

from ..errors import (
    InvalidParam,
    NegativeDuration,
    SequenceSyntaxError,
    UnbalancedGatesWarning,
    UndefinedParam,
)
from .core import GateEvent, PulseSchedule, Segment, mu_from_tau

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<sep>[;\n])
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[{}()+\-*/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SequenceSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        if m.group() == "\n":
            line += 1
            line_start = m.end()
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# expression tree nodes: ("num", value) | ("name", ident, token) | (op, lhs, rhs) | ("neg", x)


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None, cls=SequenceSyntaxError):
        tok = tok or self.tok
        return cls(msg, tok.line, tok.col)

    def advance(self):
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, kind, text=None):
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text if tok.kind != "eof" else "end of input"
            raise self.error(f"expected {want}, got {got!r}")
        return self.advance()

    def skip_seps(self):
        while self.tok.kind == "sep":
            self.advance()

    def end_statement(self):
        if self.tok.kind == "sep":
            self.skip_seps()
        elif not (self.tok.kind == "eof" or self.tok.text == "}"):
            raise self.error(f"expected end of statement, got {self.tok.text!r}")

    def integer(self):
        tok = self.expect("number")
        if not tok.text.isdigit():
            raise self.error(f"expected an integer, got {tok.text!r}", tok)
        return int(tok.text), tok

    def signed_number(self):
        sign = 1.0
        if self.tok.text in "+-" and self.tok.kind == "op":
            sign = -1.0 if self.advance().text == "-" else 1.0
        return sign * float(self.expect("number").text)

    def program(self):
        decls = {"params": {}}
        self.skip_seps()
        while self.tok.kind == "ident" and self.tok.text in ("dim", "dt", "param"):
            key = self.advance()
            if key.text == "dim":
                decls["dim"] = self.integer()
            elif key.text == "dt":
                decls["dt"] = (self.signed_number(), key)
            else:
                name = self.expect("ident")
                if name.text in ("dt", "dim"):
                    raise self.error(f"parameter name {name.text!r} is reserved", name)
                decls["params"][name.text] = self.signed_number()
            self.end_statement()
        stmts = self.statements(top=True)
        self.expect("eof")
        return decls, stmts

    def statements(self, top=False):
        stmts = []
        self.skip_seps()
        while self.tok.kind != "eof" and self.tok.text != "}":
            stmts.append(self.statement())
            self.end_statement()
        return stmts

    def statement(self):
        tok = self.tok
        if tok.kind != "ident":
            raise self.error(f"expected a statement, got {tok.text!r}")
        if tok.text in ("dim", "dt", "param"):
            raise self.error("declarations must precede statements")
        self.advance()
        if tok.text == "repeat":
            count, ctok = self.integer()
            if count < 1:
                raise self.error("repeat count must be >= 1", ctok)
            self.expect("op", "{")
            body = self.statements()
            self.expect("op", "}")
            return ("repeat", count, body, tok)
        if tok.text == "sys":
            mode = self.expect("ident")
            if mode.text not in ("on", "off"):
                raise self.error(f"expected 'on' or 'off', got {mode.text!r}", mode)
            start = self.tok
            return ("sys", mode.text == "on", self.expr(), start)
        if tok.text == "gate":
            i, itok = self.integer()
            j, _ = self.integer()
            return ("gate", i, j, itok)
        raise self.error(f"unknown statement {tok.text!r}", tok)

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance()
            node = (op.text, node, self.factor(), op)
        return node

    def factor(self):
        tok = self.tok
        if tok.kind == "op" and tok.text in "+-":
            self.advance()
            inner = self.factor()
            return ("neg", inner) if tok.text == "-" else inner
        if tok.kind == "number":
            self.advance()
            return ("num", float(tok.text))
        if tok.kind == "ident":
            self.advance()
            return ("name", tok.text, tok)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect("op", ")")
            return node
        got = tok.text if tok.kind != "eof" else "end of input"
        raise self.error(f"expected a number, name or '(', got {got!r}")


def _evaluate(node, env):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "name":
        name, tok = node[1], node[2]
        if name not in env:
            raise UndefinedParam(f"undefined parameter {name!r}", tok.line, tok.col)
        return env[name]
    if kind == "neg":
        return -_evaluate(node[1], env)
    lhs, rhs = _evaluate(node[1], env), _evaluate(node[2], env)
    if kind == "+":
        return lhs + rhs
    if kind == "-":
        return lhs - rhs
    if kind == "*":
        return lhs * rhs
    if rhs == 0:
        tok = node[3]
        raise SequenceSyntaxError("division by zero", tok.line, tok.col)
    return lhs / rhs


def _resolve_params(params):
    params = dict(params)
    lam = params.get("lambda")
    for tau, mu in (("tau", "mu"), ("tau1", "mu1"), ("tau2", "mu2")):
        if tau in params and mu not in params and lam is not None:
            params[mu] = mu_from_tau(params[tau], lam)
    return params


def _flatten(stmts, env, dim):
    out = []
    for st in stmts:
        if st[0] == "repeat":
            body = _flatten(st[2], env, dim)
            out.extend(body * st[1])
        elif st[0] == "sys":
            value = _evaluate(st[2], env)
            tok = st[3]
            if value < 0:
                raise NegativeDuration(f"duration evaluates to {value:g}", tok.line, tok.col)
            out.append(Segment(value, st[1]))
        else:
            _, i, j, tok = st
            if i == j or not (1 <= i <= dim and 1 <= j <= dim):
                raise SequenceSyntaxError(f"gate {i} {j} invalid for dim {dim}", tok.line, tok.col)
            out.append(GateEvent((min(i, j) - 1, max(i, j) - 1)))
    return out


def parse_sequence_dsl(text, overrides=None):
    """
    Parse a sequence program into a :class:`PulseSchedule`.

    ``overrides`` replaces (or adds) parameter values before evaluation;
    ``dt`` may be overridden too. Raises :class:`SequenceSyntaxError`,
    :class:`UndefinedParam` or :class:`NegativeDuration` with line/column;
    an unbalanced gate cycle only warns.
    """
    decls, stmts = _Parser(text).program()
    if "dim" not in decls:
        raise SequenceSyntaxError("missing 'dim' declaration", 1, 1)
    if "dt" not in decls:
        raise SequenceSyntaxError("missing 'dt' declaration", 1, 1)
    dim, dim_tok = decls["dim"]
    dt, dt_tok = decls["dt"]
    params = dict(decls["params"])
    overrides = dict(overrides or {})
    dt = float(overrides.pop("dt", dt))
    params.update(overrides)
    params = _resolve_params(params)
    if dt <= 0:
        raise SequenceSyntaxError("dt must be positive", dt_tok.line, dt_tok.col)
    if not 2 <= dim <= 8:
        raise SequenceSyntaxError(f"dim {dim} outside 2..8", dim_tok.line, dim_tok.col)
    env = dict(params)
    env["dt"] = dt
    if len(stmts) == 1 and stmts[0][0] == "repeat":
        repeats = stmts[0][1]
        cycle = _flatten(stmts[0][2], env, dim)
    else:
        repeats = 1
        cycle = _flatten(stmts, env, dim)
    try:
        schedule = PulseSchedule(dim, dt, tuple(cycle), repeats, params, "dsl", text)
    except InvalidParam as exc:
        raise SequenceSyntaxError(str(exc), 1, 1) from exc
    if not schedule.is_balanced():
        warnings.warn(
            f"cycle gates do not cancel (net permutation {schedule.net_permutation().tolist()})",
            UnbalancedGatesWarning, stacklevel=2)
    return schedule


def emit_sequence_dsl(schedule):
    """Canonical program text: parameters inlined, durations in us to 12 digits."""
    lines = [f"dim {schedule.dim}", f"dt {schedule.dt:.12g}", f"repeat {schedule.repeats} {{"]
    for item in schedule.cycle:
        if isinstance(item, GateEvent):
            i, j = item.pair
            lines.append(f"  gate {i + 1} {j + 1}")
        else:
            lines.append(f"  sys {'on' if item.system_on else 'off'} {item.duration:.12g}")
    lines.append("}")
    return "\n".join(lines) + "\n"
