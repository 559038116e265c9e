"""Test corpora: worked example terms, a random well-typed term generator,
nested-conditional chains, and random circuits with conditionals."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterator

from .circuit import Circuit, Ite as CIte, gate, seq
from .derivation import infer
from .errors import GoiqcError
from .syntax import (
    BIT,
    QBIT,
    UNIT,
    App,
    BoolLit,
    Const,
    Ite,
    Lam,
    LetPair,
    LetStar,
    Lolli,
    Pair,
    Qbit,
    Bit,
    Star,
    Tensor,
    Term,
    TypeExpr,
    Unit,
    Var,
    parse_term,
    pretty,
    subterms,
)

COIN = r"meas (H (new (one *)))"
BELL = r"(\f.\x. CNOT (f x, new (zero *))) H (new (zero *))"
# R U W: the order in which R composes U and W depends on a coin flip
RUW = r"(if meas (H (new ff)) then \f g x. f (g x) else \f g x. g (f x)) S T"
PQ = r"(if meas (H (new ff)) then \f. f else \f x. H (f x)) (if meas (H (new ff)) then S else T)"

EXAMPLES = {"coin": COIN, "bell": BELL, "ruw": RUW, "pq": PQ}


def example(name: str) -> Term:
    return parse_term(EXAMPLES[name])


def chain(n: int) -> Term:
    """``n`` coin-controlled conditionals in a row, followed by one shared T gate."""
    t: Term = parse_term("new ff")
    for _ in range(n):
        coin = parse_term("meas (H (new ff))")
        t = App(Ite(coin, Const("H"), Const("S")), t)
    return App(Const("T"), t)


# ---------------------------------------------------------------- random terms


def count_meas(t: Term) -> int:
    return sum(1 for s in subterms(t) if isinstance(s, Const) and s.op == "meas")


def count_ites(t: Term) -> int:
    return sum(1 for s in subterms(t) if isinstance(s, Ite))


QQ = Lolli(QBIT, QBIT)
_ARG_TYPES = (BIT, QBIT, QQ)
_TOP_TYPES = (BIT, QBIT, Tensor(BIT, QBIT), Tensor(QBIT, QBIT), Tensor(BIT, BIT))


class TermGenerator:
    """Random closed terms of a given type in which every variable is used exactly once."""

    def __init__(self, seed: int = 0, max_depth: int = 5):
        self.rng = random.Random(seed)
        self.max_depth = max_depth
        self._names = itertools.count()

    def fresh(self, stem: str = "x") -> str:
        return f"{stem}{next(self._names)}"

    # -- closing helpers

    def make(self, a: TypeExpr) -> Term:
        if isinstance(a, Bit):
            return BoolLit(self.rng.random() < 0.5)
        if isinstance(a, Qbit):
            return App(Const("new"), BoolLit(False))
        if isinstance(a, Unit):
            return Star()
        if isinstance(a, Tensor):
            return Pair(self.make(a.left), self.make(a.right))
        x = self.fresh()
        return Lam(x, LetStar(self.kill(Var(x), a.arg), self.make(a.res)))

    def kill(self, t: Term, a: TypeExpr) -> Term:
        """A term of type unit that consumes ``t``."""
        if isinstance(a, Bit):
            return App(Const("discard"), t)
        if isinstance(a, Qbit):
            return App(Const("discard"), App(Const("meas"), t))
        if isinstance(a, Unit):
            return t
        if isinstance(a, Tensor):
            x, y = self.fresh(), self.fresh()
            return LetPair(x, y, t, LetStar(self.kill(Var(x), a.left), self.kill(Var(y), a.right)))
        return self.kill(App(t, self.make(a.arg)), a.res)

    def _close(self, body: Term, ctx: list) -> Term:
        for x, a in ctx:
            body = LetStar(self.kill(Var(x), a), body)
        return body

    def _split(self, ctx: list) -> tuple[list, list]:
        left, right = [], []
        for v in ctx:
            (left if self.rng.random() < 0.5 else right).append(v)
        return left, right

    # -- generation

    def gen(self, a: TypeExpr, ctx: list, depth: int) -> Term:
        rng = self.rng
        if depth <= 0:
            same = [v for v in ctx if v[1] == a]
            if same:
                v = rng.choice(same)
                return self._close(Var(v[0]), [w for w in ctx if w != v])
            return self._close(self.make(a), ctx)
        d = depth - 1
        options = ["app", "letpair", "ite", "own", "own"]
        same = [v for v in ctx if v[1] == a]
        if same:
            options += ["var", "var"]
        choice = rng.choice(options)
        if choice == "var":
            v = rng.choice(same)
            return self._close(Var(v[0]), [w for w in ctx if w != v])
        if choice == "app":
            b = rng.choice(_ARG_TYPES)
            c1, c2 = self._split(ctx)
            return App(self.gen(Lolli(b, a), c1, d), self.gen(b, c2, d))
        if choice == "letpair":
            b, c = rng.choice(_ARG_TYPES[:2]), rng.choice(_ARG_TYPES[:2])
            x, y = self.fresh(), self.fresh()
            c1, c2 = self._split(ctx)
            return LetPair(x, y, self.gen(Tensor(b, c), c1, d), self.gen(a, c2 + [(x, b), (y, c)], d))
        if choice == "ite":
            cg, cb = self._split(ctx)
            return Ite(self.gen(BIT, cg, d), self.gen(a, cb, d), self.gen(a, cb, d))
        return self._own(a, ctx, d)

    def _own(self, a: TypeExpr, ctx: list, d: int) -> Term:
        rng = self.rng
        if isinstance(a, Bit):
            k = rng.randrange(3)
            if k == 0:
                return self._close(BoolLit(rng.random() < 0.5), ctx)
            if k == 1:
                return App(Const("meas"), self.gen(QBIT, ctx, d))
            return App(Const(rng.choice(["zero", "one"])), self.gen(UNIT, ctx, d))
        if isinstance(a, Qbit):
            if rng.random() < 0.4:
                return App(Const("new"), self.gen(BIT, ctx, d))
            return App(Const(rng.choice(["H", "S", "T", "X"])), self.gen(QBIT, ctx, d))
        if isinstance(a, Unit):
            if rng.random() < 0.5:
                return self._close(Star(), ctx)
            return App(Const("discard"), self.gen(BIT, ctx, d))
        if isinstance(a, Tensor):
            if a == Tensor(QBIT, QBIT) and rng.random() < 0.4:
                return App(Const("CNOT"), self.gen(a, ctx, d))
            c1, c2 = self._split(ctx)
            return Pair(self.gen(a.left, c1, d), self.gen(a.right, c2, d))
        if a == QQ and not ctx and rng.random() < 0.4:
            return Const(rng.choice(["H", "S", "T", "X"]))
        x = self.fresh("f" if isinstance(a.arg, Lolli) else "q")
        return Lam(x, self.gen(a.res, ctx + [(x, a.arg)], d))

    def term(self) -> Term:
        a = self.rng.choice(_TOP_TYPES)
        return self.gen(a, [], self.rng.randint(1, self.max_depth))


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    source: str
    term: Term


def random_terms(n: int = 200, seed: int = 2024, max_meas: int = 3, max_ites: int = 2,
                 max_depth: int = 5, max_new: int = 6) -> list[CorpusEntry]:
    """``n`` distinct closed terms of Boolean type that pass the size filters."""
    g = TermGenerator(seed, max_depth)
    seen: set = set()
    out: list[CorpusEntry] = []
    for _ in range(200 * n):
        t = g.term()
        if count_meas(t) > max_meas or count_ites(t) > max_ites:
            continue
        if sum(1 for s in subterms(t) if isinstance(s, Const) and s.op == "new") > max_new:
            continue
        src = pretty(t)
        if src in seen:
            continue
        try:
            infer(t)
        except GoiqcError:
            continue
        seen.add(src)
        out.append(CorpusEntry(f"rand{len(out):03d}", src, t))
        if len(out) == n:
            return out
    raise AssertionError(f"generator produced only {len(out)} terms")


def corpus(n: int = 200, seed: int = 2024) -> list[CorpusEntry]:
    """Random terms plus the closed Boolean-typed examples."""
    fixed = [CorpusEntry(k, EXAMPLES[k], parse_term(EXAMPLES[k])) for k in ("coin", "bell")]
    return fixed + random_terms(n, seed)


# ---------------------------------------------------------------- random circuits


def random_circuit(rng: random.Random, n_qubits: int = 2, n_bits: int = 1, length: int = 6,
                   max_ites: int = 2, depth: int = 0) -> tuple[Circuit, dict]:
    """A random well-typed circuit over ``q1..`` and ``b1..``, with conditionals and indexed meas."""
    env = {f"q{k}": QBIT for k in range(1, n_qubits + 1)}
    env.update({f"b{k}": BIT for k in range(1, n_bits + 1)})
    state = {"fresh": itertools.count(1), "meas": itertools.count(), "ites": 0}
    c, _ = _rand_block(rng, dict(env), length, max_ites, state, depth)
    return c, env


def _rand_block(rng, live: dict, length: int, max_ites: int, state: dict, depth: int):
    parts = []
    for _ in range(length):
        qs = [x for x, t in live.items() if t == QBIT]
        bs = [x for x, t in live.items() if t == BIT]
        choices = ["U", "U"]
        if len(qs) >= 2:
            choices += ["CNOT"]
        if len(qs) >= 3:
            choices += ["CSWAP"]
        if qs and len(qs) + len(bs) > 1:
            choices += ["meas"]
        if bs and len(qs) < 3:
            choices += ["new"]
        if bs and state["ites"] < max_ites and depth < 2:
            choices += ["ite", "ite"]
        if len(bs) < 2:
            choices += ["zero"]
        if bs and (len(bs) > 1 or qs):
            choices += ["discard"]
        k = rng.choice(choices)
        if k == "U" and qs:
            x = rng.choice(qs)
            parts.append(gate(rng.choice(["H", "S", "T", "X"]), [x], [x]))
        elif k == "CNOT":
            a, b = rng.sample(qs, 2)
            parts.append(gate("CNOT", [a, b], [a, b]))
        elif k == "CSWAP":
            ws = rng.sample(qs, 3)
            parts.append(gate("CSWAP", ws, ws))
        elif k == "meas":
            x = rng.choice(qs)
            b = f"m{next(state['fresh'])}"
            parts.append(gate("meas", [x], [b], next(state["meas"])))
            live.pop(x)
            live[b] = BIT
        elif k == "new":
            b = rng.choice(bs)
            q = f"n{next(state['fresh'])}"
            parts.append(gate("new", [b], [q]))
            live.pop(b)
            live[q] = QBIT
        elif k == "zero":
            b = f"z{next(state['fresh'])}"
            parts.append(gate(rng.choice(["zero", "one"]), [], [b]))
            live[b] = BIT
        elif k == "discard":
            b = rng.choice(bs)
            parts.append(gate("discard", [b], []))
            live.pop(b)
        elif k == "ite":
            state["ites"] += 1
            g = rng.choice(bs)
            live.pop(g)
            inner = dict(live)
            then_c, out1 = _rand_block(rng, dict(inner), max(1, length // 2), max_ites, state, depth + 1)
            else_c, out2 = _rand_block(rng, dict(inner), max(1, length // 2), max_ites, state, depth + 1)
            then_c, else_c = _align(then_c, out1, else_c, out2, inner, state)
            parts.append(CIte(g, then_c, else_c))
            live.clear()
            live.update(_typecheck_out(then_c, inner))
    return (seq(*parts) if parts else seq()), live


def _typecheck_out(c, env):
    from .circuit import typecheck_circuit

    return typecheck_circuit(c, env)


def _align(then_c, out1: dict, else_c, out2: dict, env_in: dict, state: dict):
    """Make both branches end in the same environment.

    Every wire a branch leaves behind is renamed to a shared fresh label,
    pairing wires of equal type; unmatched wires are measured and discarded.
    """

    def kill(x, t):
        if t == QBIT:
            b = f"k{next(state['fresh'])}"
            return [gate("meas", [x], [b], next(state["meas"])), gate("discard", [b], [])]
        return [gate("discard", [x], [])]

    tail1, tail2 = [], []
    common = {x for x in out1 if out2.get(x) == out1[x]}
    rest1 = sorted((x for x in out1 if x not in common), key=str)
    rest2 = sorted((x for x in out2 if x not in common), key=str)
    for ty in (QBIT, BIT):
        r1 = [x for x in rest1 if out1[x] == ty]
        r2 = [x for x in rest2 if out2[x] == ty]
        for a, b in zip(r1, r2):
            shared = f"w{next(state['fresh'])}"
            tail1.append(gate("id" if ty == QBIT else "idb", [a], [shared]))
            tail2.append(gate("id" if ty == QBIT else "idb", [b], [shared]))
        for a in r1[len(r2):]:
            tail1 += kill(a, ty)
        for b in r2[len(r1):]:
            tail2 += kill(b, ty)
    return seq(then_c, *tail1), seq(else_c, *tail2)


def random_circuits(n: int = 100, seed: int = 7) -> Iterator[tuple[Circuit, dict]]:
    rng = random.Random(seed)
    for _ in range(n):
        yield random_circuit(rng, rng.randint(1, 2), rng.randint(1, 2), rng.randint(3, 8))
