"""Linear type inference with explicit derivation trees, and the atom positions
that tokens travel through.

A position is an atom occurrence in one judgment of a derivation: the node,
which side of the turnstile (a context variable or the conclusion), and the
path of left/right steps through tensors and implications.  Polarity is
positive at the root of the conclusion type, flips on the left of an
implication, and is flipped once more for context occurrences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .errors import BranchMismatch, LinearityError, TypeMismatch, TypingError
from .syntax import (
    BIT,
    QBIT,
    UNIT,
    OP_SIGNATURES,
    App,
    Bit,
    BoolLit,
    Const,
    Ite,
    Lam,
    LetPair,
    LetStar,
    Lolli,
    Pair,
    Qbit,
    Star,
    Tensor,
    Term,
    TypeExpr,
    Unit,
    Var,
    atoms,
    free_vars,
    polarity_in,
    pretty,
    pretty_type,
)

RULES = ("Ax", "Lam", "App", "UnitIntro", "LetStar", "PairIntro", "LetPair", "Ite", "Op", "BoolAx")


@dataclass(frozen=True, eq=False)
class TypingDerivation:
    rule: str
    context: tuple  # ordered ((name, TypeExpr), ...)
    term: Term
    type: TypeExpr
    premises: tuple
    node_id: int
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def ctx(self) -> dict:
        return dict(self.context)

    def nodes(self) -> Iterator["TypingDerivation"]:
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(n.premises))

    def judgment(self) -> str:
        ctx = ", ".join(f"{x}:{pretty_type(a)}" for x, a in self.context)
        return f"{ctx} |- {pretty(self.term)} : {pretty_type(self.type)}"

    @property
    def index(self) -> "DerivationIndex":
        idx = self._index.get("index")
        if idx is None:
            idx = DerivationIndex(self)
            self._index["index"] = idx
        return idx


# ---------------------------------------------------------------- inference


class _TV:
    """A unification variable."""

    __slots__ = ("ref", "n")
    _count = 0

    def __init__(self):
        _TV._count += 1
        self.n = _TV._count
        self.ref = None


def _resolve(t):
    while isinstance(t, _TV) and t.ref is not None:
        t = t.ref
    return t


def _occurs(v: _TV, t) -> bool:
    t = _resolve(t)
    if t is v:
        return True
    if isinstance(t, Tensor):
        return _occurs(v, t.left) or _occurs(v, t.right)
    if isinstance(t, Lolli):
        return _occurs(v, t.arg) or _occurs(v, t.res)
    return False


def _unify(a, b) -> bool:
    a, b = _resolve(a), _resolve(b)
    if a is b:
        return True
    if isinstance(a, _TV):
        if _occurs(a, b):
            return False
        a.ref = b
        return True
    if isinstance(b, _TV):
        return _unify(b, a)
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        return _unify(a.left, b.left) and _unify(a.right, b.right)
    if isinstance(a, Lolli) and isinstance(b, Lolli):
        return _unify(a.arg, b.arg) and _unify(a.res, b.res)
    return type(a) is type(b) and isinstance(a, (Bit, Qbit, Unit))


def _zonk(t) -> TypeExpr:
    """Replace solved variables; unconstrained ones default to qbit."""
    t = _resolve(t)
    if isinstance(t, _TV):
        t.ref = QBIT
        return QBIT
    if isinstance(t, Tensor):
        return Tensor(_zonk(t.left), _zonk(t.right))
    if isinstance(t, Lolli):
        return Lolli(_zonk(t.arg), _zonk(t.res))
    return t


def _show(t) -> str:
    t = _resolve(t)
    if isinstance(t, _TV):
        return f"?{t.n}"
    if isinstance(t, Tensor):
        return f"({_show(t.left)} * {_show(t.right)})"
    if isinstance(t, Lolli):
        return f"({_show(t.arg)} -o {_show(t.res)})"
    return str(t)


def _linear_fv(t: Term) -> frozenset:
    """Free variables, checking that every variable is used exactly once."""
    if isinstance(t, Var):
        return frozenset([t.name])
    if isinstance(t, (Star, Const, BoolLit)):
        return frozenset()
    if isinstance(t, Lam):
        body = _linear_fv(t.body)
        if t.name not in body:
            raise LinearityError(f"variable {t.name!r} is bound but never used")
        return body - {t.name}
    if isinstance(t, LetPair):
        if t.x == t.y:
            raise LinearityError(f"pattern binds {t.x!r} twice")
        bound = _linear_fv(t.bound)
        body = _linear_fv(t.body)
        for v in (t.x, t.y):
            if v not in body:
                raise LinearityError(f"variable {v!r} is bound but never used")
        return _disjoint(bound, body - {t.x, t.y})
    if isinstance(t, (App, Pair, LetStar)):
        a, b = (t.fun, t.arg) if isinstance(t, App) else (
            (t.fst, t.snd) if isinstance(t, Pair) else (t.bound, t.body))
        return _disjoint(_linear_fv(a), _linear_fv(b))
    if isinstance(t, Ite):
        guard = _linear_fv(t.guard)
        left = _linear_fv(t.then_branch)
        right = _linear_fv(t.else_branch)
        if left != right:
            raise BranchMismatch(
                f"branches use different variables: {sorted(left)} vs {sorted(right)}")
        return _disjoint(guard, left)
    raise TypeError(f"not a term: {t!r}")


def _disjoint(a: frozenset, b: frozenset) -> frozenset:
    both = a & b
    if both:
        raise LinearityError(f"variable {sorted(both)[0]!r} is used more than once")
    return a | b


@dataclass
class _Pre:
    rule: str
    term: Term
    type: object
    premises: list
    binders: tuple = ()  # (name, type) appended to the premise contexts


def _infer(t: Term, env: dict) -> _Pre:
    if isinstance(t, Var):
        return _Pre("Ax", t, env[t.name], [])
    if isinstance(t, Const):
        return _Pre("Op", t, OP_SIGNATURES[t.op].type, [])
    if isinstance(t, BoolLit):
        return _Pre("BoolAx", t, BIT, [])
    if isinstance(t, Star):
        return _Pre("UnitIntro", t, UNIT, [])
    if isinstance(t, Lam):
        a = _TV()
        body = _infer(t.body, {**env, t.name: a})
        return _Pre("Lam", t, Lolli(a, body.type), [body], ((t.name, a),))
    if isinstance(t, App):
        f = _infer(t.fun, env)
        x = _infer(t.arg, env)
        r = _TV()
        if not _unify(f.type, Lolli(x.type, r)):
            raise TypeMismatch(
                f"cannot apply {pretty(t.fun)} : {_show(f.type)} "
                f"to {pretty(t.arg)} : {_show(x.type)}")
        return _Pre("App", t, r, [f, x])
    if isinstance(t, Pair):
        a = _infer(t.fst, env)
        b = _infer(t.snd, env)
        return _Pre("PairIntro", t, Tensor(a.type, b.type), [a, b])
    if isinstance(t, LetStar):
        m = _infer(t.bound, env)
        if not _unify(m.type, UNIT):
            raise TypeMismatch(f"{pretty(t.bound)} : {_show(m.type)} is not of type 1")
        n = _infer(t.body, env)
        return _Pre("LetStar", t, n.type, [m, n])
    if isinstance(t, LetPair):
        m = _infer(t.bound, env)
        a, b = _TV(), _TV()
        if not _unify(m.type, Tensor(a, b)):
            raise TypeMismatch(f"{pretty(t.bound)} : {_show(m.type)} is not a pair")
        n = _infer(t.body, {**env, t.x: a, t.y: b})
        return _Pre("LetPair", t, n.type, [m, n], ((t.x, a), (t.y, b)))
    if isinstance(t, Ite):
        g = _infer(t.guard, env)
        if not _unify(g.type, BIT):
            raise TypeMismatch(f"guard {pretty(t.guard)} : {_show(g.type)} is not a bit")
        p = _infer(t.then_branch, env)
        q = _infer(t.else_branch, env)
        if not _unify(p.type, q.type):
            raise BranchMismatch(
                f"branches have types {_show(p.type)} and {_show(q.type)}")
        return _Pre("Ite", t, p.type, [g, p, q])
    raise TypeError(f"not a term: {t!r}")


def infer(term: Term, context: Optional[dict] = None) -> TypingDerivation:
    """Type ``term`` in ``context`` and return its derivation tree.

    Unconstrained type variables (as in a bare ``\\x. x``) default to qbit.
    """
    context = dict(context or {})
    used = _linear_fv(term)
    unbound = used - set(context)
    if unbound:
        raise TypingError(f"unbound variable {sorted(unbound)[0]!r}")
    unused = set(context) - used
    if unused:
        raise LinearityError(f"context variable {sorted(unused)[0]!r} is never used")
    pre = _infer(term, context)
    counter = iter(range(1 << 62))

    def build(p: _Pre, ctx: list) -> TypingDerivation:
        node_id = next(counter)
        prems = []
        for k, child in enumerate(p.premises):
            fv = free_vars(child.term)
            sub = [(x, a) for x, a in ctx if x in fv]
            # binders scope over the body premise only
            if p.binders and (p.rule == "Lam" or k == 1):
                sub += [(x, _zonk(a)) for x, a in p.binders]
            prems.append(sub)
        built = [build(child, sub) for child, sub in zip(p.premises, prems)]
        return TypingDerivation(p.rule, tuple(ctx), p.term, _zonk(p.type), tuple(built), node_id)

    # nodes must be numbered in preorder, so ids are drawn before premises are built
    return build(pre, [(x, context[x]) for x in context])


# ---------------------------------------------------------------- positions


@dataclass(frozen=True)
class Position:
    node: int
    side: Optional[str]  # context variable name, or None for the conclusion
    path: tuple
    kind: str = field(compare=False)  # "bit" | "qbit" | "unit"
    polarity: int = field(compare=False)  # +1 or -1

    @property
    def is_data(self) -> bool:
        return self.kind != "unit"

    @property
    def positive(self) -> bool:
        return self.polarity > 0

    def key(self) -> tuple:
        return (self.node, self.side or "", self.side is not None, self.path)

    def __str__(self) -> str:
        side = "|-" if self.side is None else self.side
        path = "".join("LR"[s] for s in self.path) or "."
        sign = "+" if self.polarity > 0 else "-"
        return f"{self.node}:{side}:{path}{sign}"


def _kind(a: TypeExpr) -> str:
    if isinstance(a, Bit):
        return "bit"
    if isinstance(a, Qbit):
        return "qbit"
    return "unit"


def node_positions(d: TypingDerivation) -> list[Position]:
    out = []
    for x, a in d.context:
        for path, atom in atoms(a):
            out.append(Position(d.node_id, x, path, _kind(atom), -polarity_in(a, path)))
    for path, atom in atoms(d.type):
        out.append(Position(d.node_id, None, path, _kind(atom), polarity_in(d.type, path)))
    return out


class DerivationIndex:
    """Parent links, premise slots and positions of a derivation, viewed from ``root``."""

    def __init__(self, root: TypingDerivation):
        self.root = root
        self.node: dict[int, TypingDerivation] = {}
        self.parent: dict[int, Optional[int]] = {}
        self.slot: dict[int, int] = {}  # premise index within the parent
        self.in_branch: dict[int, bool] = {}
        self.positions: dict[tuple, Position] = {}
        stack = [(root, None, 0, False)]
        while stack:
            n, parent, slot, branch = stack.pop()
            self.node[n.node_id] = n
            self.parent[n.node_id] = parent
            self.slot[n.node_id] = slot
            self.in_branch[n.node_id] = branch
            for p in node_positions(n):
                self.positions[(p.node, p.side, p.path)] = p
            for k in range(len(n.premises) - 1, -1, -1):
                inner = branch or (n.rule == "Ite" and k > 0)
                stack.append((n.premises[k], n.node_id, k, inner))

    def pos(self, node: int, side: Optional[str], path: tuple) -> Position:
        return self.positions[(node, side, path)]

    def ordered_positions(self) -> list[Position]:
        return [p for n in sorted(self.node) for p in node_positions(self.node[n])]


def all_positions(d: TypingDerivation) -> set[Position]:
    return set(d.index.positions.values())


@dataclass(frozen=True)
class PositionSets:
    ndata: frozenset
    pdata: frozenset
    nones: frozenset
    pones: frozenset
    ones: frozenset
    guard: frozenset
    consts: frozenset  # conclusions of tt/ff axioms, injected like the ones
    ndata_down: frozenset
    pdata_down: frozenset
    nones_down: frozenset
    pones_down: frozenset
    ones_down: frozenset
    guard_down: frozenset
    consts_down: frozenset


def position_sets(d: TypingDerivation) -> PositionSets:
    idx = d.index
    root = node_positions(d)
    ndata = frozenset(p for p in root if p.is_data and not p.positive)
    pdata = frozenset(p for p in root if p.is_data and p.positive)
    nones = frozenset(p for p in root if not p.is_data and not p.positive)
    pones = frozenset(p for p in root if not p.is_data and p.positive)
    ones, guard, consts = set(), set(), set()
    for n in idx.node.values():
        if n.rule == "UnitIntro":
            ones.add(idx.pos(n.node_id, None, ()))
        elif n.rule == "BoolAx":
            consts.add(idx.pos(n.node_id, None, ()))
        elif n.rule == "Ite":
            guard.add(idx.pos(n.premises[0].node_id, None, ()))

    def down(s):
        return frozenset(p for p in s if not idx.in_branch[p.node])

    return PositionSets(
        ndata, pdata, nones, pones, frozenset(ones), frozenset(guard), frozenset(consts),
        down(ndata), down(pdata), down(nones), down(pones), down(ones), down(guard), down(consts),
    )


class Labeling:
    """Bijection between positions and wire labels ``l<N>``, in creation order."""

    def __init__(self, positions: Iterable[Position], start: int = 1):
        self.label: dict[Position, str] = {}
        self.position: dict[str, Position] = {}
        for k, p in enumerate(positions, start):
            lab = f"l{k}"
            self.label[p] = lab
            self.position[lab] = p

    def __getitem__(self, p: Position) -> str:
        return self.label[p]

    def __len__(self) -> int:
        return len(self.label)


def labeling(d: TypingDerivation) -> Labeling:
    lab = d._index.get("labeling")
    if lab is None:
        lab = Labeling(d.index.ordered_positions())
        d._index["labeling"] = lab
    return lab


def label_key(label: str) -> tuple:
    """Natural order on labels: prefix, then numeric suffix."""
    head = label.rstrip("0123456789")
    tail = label[len(head):]
    return (head, int(tail) if tail else -1, label)


def to_json(d: TypingDerivation) -> str:
    rows = []
    for n in sorted(d.nodes(), key=lambda n: n.node_id):
        rows.append({
            "nodeId": n.node_id,
            "rule": n.rule,
            "judgment": n.judgment(),
            "premises": [p.node_id for p in n.premises],
        })
    return json.dumps(rows, indent=2)
