"""Abstract syntax of the linear quantum lambda-calculus, its parser and printer.

Surface grammar (ASCII)::

    term ::= \\x y. term | let * = term in term | let (x, y) = term in term
           | let x = term in term | if term then term else term | app
    app  ::= atom atom* [lam | let | if]
    atom ::= ident | const | * | tt | ff | (term) | (term, term, ...)

``let x = M in N`` is sugar for ``(\\x. N) M`` and ``(a, b, c)`` for
``(a, (b, c))``.  Types are written with ``qbit``, ``bit``, ``1``, ``*``
for tensor and ``-o`` for linear implication (right associative).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

from .errors import ParseError, UnknownConstant


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class Bit:
    def __str__(self) -> str:
        return "bit"


@dataclass(frozen=True)
class Qbit:
    def __str__(self) -> str:
        return "qbit"


@dataclass(frozen=True)
class Unit:
    def __str__(self) -> str:
        return "1"


@dataclass(frozen=True)
class Tensor:
    left: "TypeExpr"
    right: "TypeExpr"

    def __str__(self) -> str:
        return pretty_type(self)


@dataclass(frozen=True)
class Lolli:
    arg: "TypeExpr"
    res: "TypeExpr"

    def __str__(self) -> str:
        return pretty_type(self)


TypeExpr = Union[Bit, Qbit, Unit, Tensor, Lolli]

BIT = Bit()
QBIT = Qbit()
UNIT = Unit()


def is_base(t: TypeExpr) -> bool:
    return isinstance(t, (Bit, Qbit))


def is_atom(t: TypeExpr) -> bool:
    return isinstance(t, (Bit, Qbit, Unit))


def is_boolean(t: TypeExpr) -> bool:
    """True when no linear implication occurs in ``t``."""
    if isinstance(t, Lolli):
        return False
    if isinstance(t, Tensor):
        return is_boolean(t.left) and is_boolean(t.right)
    return True


def tensor_of(types) -> TypeExpr:
    """Right-nested tensor of a list of types; the empty tensor is 1."""
    types = list(types)
    if not types:
        return UNIT
    out = types[-1]
    for t in reversed(types[:-1]):
        out = Tensor(t, out)
    return out


def atoms(t: TypeExpr, path: tuple = ()) -> Iterator[tuple[tuple, TypeExpr]]:
    """Atom occurrences of ``t`` left to right, as (path, atom) with 0=left, 1=right."""
    if isinstance(t, Tensor):
        yield from atoms(t.left, path + (0,))
        yield from atoms(t.right, path + (1,))
    elif isinstance(t, Lolli):
        yield from atoms(t.arg, path + (0,))
        yield from atoms(t.res, path + (1,))
    else:
        yield path, t


def polarity_in(t: TypeExpr, path: tuple) -> int:
    """+1 or -1: occurrences flip polarity on the left of a linear implication."""
    pol = 1
    for step in path:
        if isinstance(t, Lolli):
            if step == 0:
                pol = -pol
                t = t.arg
            else:
                t = t.res
        elif isinstance(t, Tensor):
            t = t.left if step == 0 else t.right
        else:
            raise ValueError(f"path {path} does not land on an atom")
    return pol


def subtype_at(t: TypeExpr, path: tuple) -> TypeExpr:
    for step in path:
        if isinstance(t, Lolli):
            t = t.arg if step == 0 else t.res
        elif isinstance(t, Tensor):
            t = t.left if step == 0 else t.right
        else:
            raise ValueError(f"path {path} leaves the type")
    return t


def pretty_type(t: TypeExpr) -> str:
    if isinstance(t, Lolli):
        left = pretty_type(t.arg)
        if isinstance(t.arg, Lolli):
            left = f"({left})"
        return f"{left} -o {pretty_type(t.res)}"
    if isinstance(t, Tensor):
        left = pretty_type(t.left)
        right = pretty_type(t.right)
        if isinstance(t.left, (Lolli, Tensor)):
            left = f"({left})"
        if isinstance(t.right, Lolli):
            right = f"({right})"
        return f"{left} * {right}"
    return str(t)


# ---------------------------------------------------------------- terms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lam:
    name: str
    body: "Term"


@dataclass(frozen=True)
class App:
    fun: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Star:
    pass


@dataclass(frozen=True)
class LetStar:
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class Pair:
    fst: "Term"
    snd: "Term"


@dataclass(frozen=True)
class LetPair:
    x: str
    y: str
    bound: "Term"
    body: "Term"


@dataclass(frozen=True)
class Ite:
    guard: "Term"
    then_branch: "Term"
    else_branch: "Term"


@dataclass(frozen=True)
class Const:
    op: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


Term = Union[Var, Lam, App, Star, LetStar, Pair, LetPair, Ite, Const, BoolLit]


def free_vars(t: Term) -> set[str]:
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Lam):
        return free_vars(t.body) - {t.name}
    if isinstance(t, App):
        return free_vars(t.fun) | free_vars(t.arg)
    if isinstance(t, LetStar):
        return free_vars(t.bound) | free_vars(t.body)
    if isinstance(t, Pair):
        return free_vars(t.fst) | free_vars(t.snd)
    if isinstance(t, LetPair):
        return free_vars(t.bound) | (free_vars(t.body) - {t.x, t.y})
    if isinstance(t, Ite):
        return free_vars(t.guard) | free_vars(t.then_branch) | free_vars(t.else_branch)
    return set()


def subterms(t: Term) -> Iterator[Term]:
    yield t
    for child in children(t):
        yield from subterms(child)


def children(t: Term) -> tuple:
    if isinstance(t, Lam):
        return (t.body,)
    if isinstance(t, App):
        return (t.fun, t.arg)
    if isinstance(t, LetStar):
        return (t.bound, t.body)
    if isinstance(t, Pair):
        return (t.fst, t.snd)
    if isinstance(t, LetPair):
        return (t.bound, t.body)
    if isinstance(t, Ite):
        return (t.guard, t.then_branch, t.else_branch)
    return ()


# ---------------------------------------------------------------- operations


@dataclass(frozen=True)
class OpSignature:
    name: str
    inputs: tuple
    outputs: tuple

    @property
    def type(self) -> TypeExpr:
        return Lolli(tensor_of(self.inputs), tensor_of(self.outputs))


def _sig(name, ins, outs):
    return OpSignature(name, tuple(ins), tuple(outs))


OP_SIGNATURES: dict[str, OpSignature] = {
    s.name: s
    for s in [
        _sig("zero", [], [BIT]),
        _sig("one", [], [BIT]),
        _sig("discard", [BIT], []),
        _sig("new", [BIT], [QBIT]),
        _sig("meas", [QBIT], [BIT]),
        _sig("H", [QBIT], [QBIT]),
        _sig("S", [QBIT], [QBIT]),
        _sig("T", [QBIT], [QBIT]),
        _sig("X", [QBIT], [QBIT]),
        _sig("CNOT", [QBIT, QBIT], [QBIT, QBIT]),
        _sig("CSWAP", [QBIT, QBIT, QBIT], [QBIT, QBIT, QBIT]),
        _sig("TOFFOLI", [QBIT, QBIT, QBIT], [QBIT, QBIT, QBIT]),
    ]
}

KEYWORDS = {"let", "in", "if", "then", "else", "tt", "ff"}


# ---------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<lolli>-o(?![A-Za-z0-9_']))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<sym>[\\λ.(),*=:;])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str) -> list[_Tok]:
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("sym", "ident", "lolli")

    def expect(self, text: str) -> _Tok:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> str:
        tok = self.tok
        if tok.kind != "ident" or tok.text in KEYWORDS:
            raise self.error(f"expected a variable name, found {tok.text or 'end of input'!r}")
        if tok.text in OP_SIGNATURES or tok.text[0].isupper():
            raise self.error(f"{tok.text!r} cannot be bound as a variable")
        self.i += 1
        return tok.text

    # terms

    def term(self) -> Term:
        if self.at("\\") or self.at("λ"):
            self.i += 1
            names = [self.ident()]
            while self.tok.kind == "ident" and not self.at("."):
                names.append(self.ident())
            self.expect(".")
            body = self.term()
            for name in reversed(names):
                body = Lam(name, body)
            return body
        if self.at("let"):
            self.i += 1
            if self.at("*"):
                self.i += 1
                self.expect("=")
                bound = self.term()
                self.expect("in")
                return LetStar(bound, self.term())
            if self.at("("):
                self.i += 1
                x = self.ident()
                self.expect(",")
                y = self.ident()
                self.expect(")")
                self.expect("=")
                bound = self.term()
                self.expect("in")
                return LetPair(x, y, bound, self.term())
            x = self.ident()
            self.expect("=")
            bound = self.term()
            self.expect("in")
            return App(Lam(x, self.term()), bound)
        if self.at("if"):
            self.i += 1
            guard = self.term()
            self.expect("then")
            then_branch = self.term()
            self.expect("else")
            return Ite(guard, then_branch, self.term())
        return self.application()

    def _starts_atom(self) -> bool:
        tok = self.tok
        if tok.kind == "ident":
            return tok.text not in KEYWORDS or tok.text in ("tt", "ff")
        return tok.kind == "sym" and tok.text in ("(", "*")

    def application(self) -> Term:
        fun = self.atom()
        while True:
            if self._starts_atom():
                fun = App(fun, self.atom())
            elif self.at("\\") or self.at("λ") or self.at("let") or self.at("if"):
                return App(fun, self.term())
            else:
                return fun

    def atom(self) -> Term:
        tok = self.tok
        if tok.kind == "ident":
            if tok.text == "tt":
                self.i += 1
                return BoolLit(True)
            if tok.text == "ff":
                self.i += 1
                return BoolLit(False)
            if tok.text in KEYWORDS:
                raise self.error(f"unexpected keyword {tok.text!r}")
            self.i += 1
            if tok.text in OP_SIGNATURES:
                return Const(tok.text)
            if tok.text[0].isupper():
                raise UnknownConstant(f"{tok.line}:{tok.col}: unknown constant {tok.text!r}")
            return Var(tok.text)
        if self.at("*"):
            self.i += 1
            return Star()
        if self.at("("):
            self.i += 1
            items = [self.term()]
            while self.at(","):
                self.i += 1
                items.append(self.term())
            self.expect(")")
            out = items[-1]
            for item in reversed(items[:-1]):
                out = Pair(item, out)
            return out
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    # types

    def type_(self) -> TypeExpr:
        left = self.tensor_type()
        if self.tok.kind == "lolli":
            self.i += 1
            return Lolli(left, self.type_())
        return left

    def tensor_type(self) -> TypeExpr:
        left = self.atom_type()
        if self.at("*"):
            self.i += 1
            return Tensor(left, self.tensor_type())
        return left

    def atom_type(self) -> TypeExpr:
        tok = self.tok
        if tok.kind == "ident" and tok.text in ("bit", "qbit"):
            self.i += 1
            return BIT if tok.text == "bit" else QBIT
        if tok.kind == "num" and tok.text == "1":
            self.i += 1
            return UNIT
        if self.at("("):
            self.i += 1
            t = self.type_()
            self.expect(")")
            return t
        raise self.error(f"expected a type, found {tok.text or 'end of input'!r}")

    def done(self):
        if self.tok.kind != "eof":
            raise self.error(f"unexpected trailing {self.tok.text!r}")


def parse_term(text: str) -> Term:
    p = _Parser(text)
    t = p.term()
    p.done()
    return t


def parse_type(text: str) -> TypeExpr:
    p = _Parser(text)
    t = p.type_()
    p.done()
    return t


def parse_program(text: str) -> tuple[dict, Term]:
    """Parse the contents of a ``.lq`` file: optional context header, then one term."""
    p = _Parser(text)
    context: dict[str, TypeExpr] = {}
    if p.tok.kind == "ident" and p.tok.text == "context":
        p.i += 1
        if not p.at(";"):
            while True:
                start = p.tok
                name = p.ident()
                if name in context:
                    raise p.error(f"variable {name!r} declared twice", start)
                p.expect(":")
                context[name] = p.type_()
                if not p.at(","):
                    break
                p.i += 1
        p.expect(";")
    t = p.term()
    p.done()
    return context, t


# ---------------------------------------------------------------- printer


def pretty(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Const):
        return t.op
    if isinstance(t, Star):
        return "*"
    if isinstance(t, BoolLit):
        return "tt" if t.value else "ff"
    if isinstance(t, Lam):
        return f"\\{t.name}. {pretty(t.body)}"
    if isinstance(t, LetStar):
        return f"let * = {pretty(t.bound)} in {pretty(t.body)}"
    if isinstance(t, LetPair):
        return f"let ({t.x}, {t.y}) = {pretty(t.bound)} in {pretty(t.body)}"
    if isinstance(t, Ite):
        return (
            f"if {pretty(t.guard)} then {pretty(t.then_branch)} "
            f"else {pretty(t.else_branch)}"
        )
    if isinstance(t, Pair):
        return f"({pretty(t.fst)}, {pretty(t.snd)})"
    if isinstance(t, App):
        fun = pretty(t.fun)
        if isinstance(t.fun, (Lam, LetStar, LetPair, Ite)):
            fun = f"({fun})"
        arg = pretty(t.arg)
        if isinstance(t.arg, (Lam, LetStar, LetPair, Ite, App)):
            arg = f"({arg})"
        return f"{fun} {arg}"
    raise TypeError(f"not a term: {t!r}")


def pretty_context(context: dict) -> str:
    return ", ".join(f"{x} : {pretty_type(a)}" for x, a in context.items())
