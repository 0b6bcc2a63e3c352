"""Concrete syntax: tokenizer, recursive-descent parser and printer.

Program files look like::

    var x : dim 4;
    var y : dim 2;
    let R = rot(pi/6);
    init x := ket(0);
    while meas(proj_lt(3)) on x {
        apply shift(4) on x;
        apply R on y
    }

Scalars accept ``+ - * / ^``, parentheses, ``pi``, ``sqrt``, ``cos``,
``sin``, ``exp`` and imaginary literals such as ``0.5i``.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..linalg import BinaryMeasurement, Register, Variable
from . import builtins
from .ast import Ambient, Apply, If, Init, Program, Seq, Skip, While, seq


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # ident, num, imag, sym, eof
    value: object
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>(\#|//)[^\n]*)
  | (?P<num>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)(?P<imag>i(?![A-Za-z0-9_]))?
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>:=|[-+*/^(){}\[\],;:~=])
    """,
    re.VERBOSE,
)

KEYWORDS = {"skip", "apply", "init", "if", "else", "while", "on", "meas", "var", "let", "dim"}


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        col = pos - line_start + 1
        kind = m.lastgroup
        if m.group("nl"):
            line += 1
            line_start = m.end()
        elif m.group("num") is not None:
            val = float(m.group("num"))
            if m.group("imag"):
                tokens.append(Token("imag", complex(0, val), line, col))
            else:
                tokens.append(Token("num", val, line, col))
        elif m.group("ident"):
            tokens.append(Token("ident", m.group("ident"), line, col))
        elif m.group("sym"):
            tokens.append(Token("sym", m.group("sym"), line, col))
        elif kind not in ("ws", "comment"):  # pragma: no cover
            raise ParseError("tokenizer error", line, col)
        pos = m.end()
    tokens.append(Token("eof", None, line, pos - line_start + 1))
    return tokens


_FUNCS = {"sqrt": cmath.sqrt, "cos": cmath.cos, "sin": cmath.sin, "exp": cmath.exp}

# A matrix expression is resolved once the register it acts on is known.
MatThunk = Callable[[int], np.ndarray]
VecThunk = Callable[[int], np.ndarray]


def _simplify(z: complex):
    return z.real if isinstance(z, complex) and z.imag == 0 else z


class Parser:
    """Recursive-descent parser for program text; subclassed for proof files."""

    def __init__(self, text: str, ambient: Ambient | None = None):
        self.tokens = tokenize(text)
        self.pos = 0
        self.declared: list[Variable] = []
        self.given = ambient
        self.ambient = ambient
        self.matrices: dict[str, MatThunk] = {}

    # -- token helpers --

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def at(self, value, kind: str | None = None) -> bool:
        t = self.tok
        if kind is not None and t.kind != kind:
            return False
        return t.value == value and t.kind in ("sym", "ident")

    def accept(self, value) -> bool:
        if self.at(value):
            self.pos += 1
            return True
        return False

    def expect(self, value) -> Token:
        if not self.at(value):
            raise self.error(f"expected {value!r}, found {self.describe(self.tok)}")
        t = self.tok
        self.pos += 1
        return t

    def expect_ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            raise self.error(f"expected a name, found {self.describe(t)}")
        self.pos += 1
        return t.value

    @staticmethod
    def describe(t: Token) -> str:
        return "end of input" if t.kind == "eof" else repr(t.value)

    # -- declarations --

    def parse_header(self):
        """Consume ``var`` and ``let`` declarations."""
        while True:
            if self.at("var", "ident"):
                self.parse_var()
            elif self.at("let", "ident"):
                self.pos += 1
                name = self.expect_ident()
                self.expect("=")
                self.matrices[name] = self.parse_matexpr()
                self.expect(";")
            else:
                break
        self.finish_ambient()

    def parse_var(self):
        start = self.expect("var")
        names = [self.expect_ident()]
        while self.accept(","):
            names.append(self.expect_ident())
        self.expect(":")
        self.expect("dim")
        d = self.parse_int()
        self.expect(";")
        for n in names:
            if n in KEYWORDS:
                raise self.error(f"{n!r} is a reserved word", start)
            self.declared.append(Variable(n, d))

    def finish_ambient(self):
        if not self.declared:
            if self.ambient is None:
                raise self.error("no variables declared and no ambient register given")
            return
        try:
            declared = Register(tuple(self.declared))
        except ValueError as exc:
            raise self.error(str(exc)) from None
        if self.given is not None:
            try:
                reg = self.given.all_vars.union(declared)
            except ValueError as exc:
                raise self.error(str(exc)) from None
        else:
            reg = declared
        self.ambient = Ambient(reg)

    def parse_vars(self) -> Register:
        names = []
        while self.tok.kind == "ident" and self.tok.value not in KEYWORDS:
            t = self.tok
            if t.value in names:
                raise self.error(f"variable {t.value!r} listed twice")
            if t.value not in self.ambient.all_vars:
                raise self.error(f"unknown variable {t.value!r}")
            names.append(t.value)
            self.pos += 1
        if not names:
            raise self.error(f"expected variable names, found {self.describe(self.tok)}")
        return self.ambient.register(*names)

    # -- scalars --

    def parse_scalar(self):
        val = self._sum()
        return _simplify(val)

    def parse_int(self) -> int:
        t = self.tok
        v = self.parse_scalar()
        if isinstance(v, complex) or int(v) != v:
            raise self.error(f"expected an integer, got {v}", t)
        return int(v)

    def _sum(self):
        v = self._product()
        while self.at("+") or self.at("-"):
            op = self.tok.value
            self.pos += 1
            rhs = self._product()
            v = v + rhs if op == "+" else v - rhs
        return v

    def _product(self):
        v = self._unary()
        while self.at("*") or self.at("/"):
            op = self.tok.value
            self.pos += 1
            rhs = self._unary()
            if op == "/" and rhs == 0:
                raise self.error("division by zero")
            v = v * rhs if op == "*" else v / rhs
        return v

    def _unary(self):
        if self.accept("-"):
            return -self._unary()
        if self.accept("+"):
            return self._unary()
        return self._power()

    def _power(self):
        base = self._atom()
        if self.accept("^"):
            return base ** self._unary()
        return base

    def _atom(self):
        t = self.tok
        if t.kind in ("num", "imag"):
            self.pos += 1
            return t.value
        if self.accept("("):
            v = self._sum()
            self.expect(")")
            return v
        if t.kind == "ident":
            if t.value == "pi":
                self.pos += 1
                return math.pi
            if t.value in _FUNCS:
                self.pos += 1
                self.expect("(")
                v = self._sum()
                self.expect(")")
                return _simplify(_FUNCS[t.value](v))
        raise self.error(f"expected a number, found {self.describe(t)}")

    def parse_scalar_list(self) -> list:
        self.expect("[")
        items = [] if self.at("]") else [self.parse_scalar()]
        while self.accept(","):
            items.append(self.parse_scalar())
        self.expect("]")
        return items

    # -- matrices and vectors --

    def parse_matexpr(self) -> MatThunk:
        t = self.tok
        name = self.expect_ident()
        if name in self.matrices:
            return self.matrices[name]
        if name == "rot":
            self.expect("(")
            theta = self.parse_scalar()
            self.expect(")")
            return self._thunk("rot", [theta], t)
        if name in ("shift", "proj_lt"):
            self.expect("(")
            k = self.parse_int()
            self.expect(")")
            return self._thunk(name, [k], t)
        if name == "proj_state":
            self.expect("(")
            v = self.parse_scalar_list()
            self.expect(")")
            return self._thunk("proj_state", [v], t)
        if name == "lit":
            self.expect("(")
            self.expect("[")
            rows = [self.parse_scalar_list()]
            while self.accept(","):
                rows.append(self.parse_scalar_list())
            self.expect("]")
            self.expect(")")
            if len({len(r) for r in rows}) != 1:
                raise self.error("ragged matrix literal", t)
            return self._thunk("literal", [rows], t)
        raise self.error(f"unknown matrix builtin or name {name!r}", t)

    def _thunk(self, name, params, tok) -> MatThunk:
        def resolve(dim: int) -> np.ndarray:
            try:
                return builtins.builtin_matrix(name, params, dim)
            except ValueError as exc:
                raise ParseError(str(exc), tok.line, tok.col) from None

        return resolve

    def parse_vecexpr(self) -> VecThunk:
        t = self.tok
        name = self.expect_ident()
        self.expect("(")
        if name == "ket":
            i = self.parse_int()
            self.expect(")")

            def resolve(dim: int) -> np.ndarray:
                try:
                    return builtins.ket(i, dim)
                except ValueError as exc:
                    raise ParseError(str(exc), t.line, t.col) from None

            return resolve
        if name == "vec":
            v = np.array(self.parse_scalar_list(), dtype=complex)
            self.expect(")")

            def resolve(dim: int) -> np.ndarray:
                if v.shape[0] != dim:
                    raise ParseError(f"vector of length {v.shape[0]} does not fit dimension {dim}", t.line, t.col)
                return v

            return resolve
        raise self.error(f"unknown state constructor {name!r}", t)

    def parse_meas(self) -> tuple[MatThunk, MatThunk | None]:
        self.expect("meas")
        self.expect("(")
        mt = self.parse_matexpr()
        mf = self.parse_matexpr() if self.accept(",") else None
        self.expect(")")
        return mt, mf

    def parse_meas_on(self) -> BinaryMeasurement:
        mt, mf = self.parse_meas()
        self.expect("on")
        reg = self.parse_vars()
        return self.make_measurement(mt, mf, reg)

    @staticmethod
    def make_measurement(mt: MatThunk, mf: MatThunk | None, reg: Register) -> BinaryMeasurement:
        t = mt(reg.dim)
        if mf is None:
            return BinaryMeasurement.projective(reg, t)
        return BinaryMeasurement(reg, t, mf(reg.dim))

    # -- statements --

    def parse_block(self, closers=("}", ")")) -> Program:
        items = [self.parse_stmt()]
        while True:
            if self.accept(";"):
                if self.tok.kind == "eof" or any(self.at(c) for c in closers):
                    break
                items.append(self.parse_stmt())
            elif self.tokens[self.pos - 1].value == "}" and self._starts_stmt():
                items.append(self.parse_stmt())
            else:
                break
        return seq(*items)

    def _starts_stmt(self) -> bool:
        return self.tok.kind == "ident" and self.tok.value in ("skip", "apply", "init", "if", "while") or self.at("(")

    def parse_braced(self) -> Program:
        self.expect("{")
        if self.accept("}"):
            return Skip()
        body = self.parse_block()
        self.expect("}")
        return body

    def parse_stmt(self) -> Program:
        t = self.tok
        if self.accept("skip"):
            return Skip()
        if self.accept("apply"):
            u = self.parse_matexpr()
            self.expect("on")
            reg = self.parse_vars()
            return Apply(u(reg.dim), reg)
        if self.accept("init"):
            reg = self.parse_vars()
            self.expect(":=")
            psi = self.parse_vecexpr()
            return Init(reg, psi(reg.dim))
        if self.accept("if"):
            m = self.parse_meas_on()
            then = self.parse_braced()
            self.expect("else")
            else_ = self.parse_braced()
            return If(m, then, else_)
        if self.accept("while"):
            m = self.parse_meas_on()
            body = self.parse_braced()
            return While(m, body)
        if self.accept("("):
            inner = self.parse_block()
            self.expect(")")
            return inner
        raise self.error(f"expected a statement, found {self.describe(t)}", t)

    def expect_eof(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.describe(self.tok)} after end of program")


def parse_file(text: str, ambient: Ambient | None = None) -> tuple[Ambient, Program]:
    p = Parser(text, ambient)
    p.parse_header()
    prog = Skip() if p.tok.kind == "eof" else p.parse_block()
    p.expect_eof()
    return p.ambient, prog


def parse(text: str, ambient: Ambient | None = None) -> Program:
    return parse_file(text, ambient)[1]


# -- printing ------------------------------------------------------------------


def format_scalar(z) -> str:
    z = complex(z)
    re_, im = z.real, z.imag
    if im == 0:
        return repr(re_)
    if re_ == 0:
        return f"{im!r}i"
    sign = "-" if math.copysign(1, im) < 0 else "+"
    return f"({re_!r}{sign}{abs(im)!r}i)"


def format_matrix(m: np.ndarray) -> str:
    rows = ("[" + ", ".join(format_scalar(x) for x in row) + "]" for row in m)
    return "lit([" + ", ".join(rows) + "])"


def format_vector(v: np.ndarray) -> str:
    return "vec([" + ", ".join(format_scalar(x) for x in v) + "])"


def format_vars(reg: Register) -> str:
    return " ".join(reg.names)


def format_measurement(m: BinaryMeasurement) -> str:
    return f"meas({format_matrix(m.m_true)}, {format_matrix(m.m_false)}) on {format_vars(m.register)}"


def pretty(p: Program, indent: int = 0) -> str:
    pad = "    " * indent
    if isinstance(p, Skip):
        return pad + "skip"
    if isinstance(p, Apply):
        return f"{pad}apply {format_matrix(p.u)} on {format_vars(p.on)}"
    if isinstance(p, Init):
        return f"{pad}init {format_vars(p.on)} := {format_vector(p.psi)}"
    if isinstance(p, If):
        return (
            f"{pad}if {format_measurement(p.m)} {{\n{pretty(p.then, indent + 1)}\n{pad}}} else {{\n"
            f"{pretty(p.else_, indent + 1)}\n{pad}}}"
        )
    if isinstance(p, While):
        return f"{pad}while {format_measurement(p.m)} {{\n{pretty(p.body, indent + 1)}\n{pad}}}"
    if isinstance(p, Seq):
        return ";\n".join(pretty(q, indent) for q in p.items)
    raise TypeError(f"not a program: {p!r}")


def format_decls(ambient: Ambient) -> str:
    return "".join(f"var {v.name} : dim {v.dim};\n" for v in ambient.all_vars)


def pretty_file(p: Program, ambient: Ambient) -> str:
    return format_decls(ambient) + pretty(p) + "\n"
