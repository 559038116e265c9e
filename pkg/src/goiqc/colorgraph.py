"""Colored typing for synchronous compilation.

Every synchronization point of a derivation gets an index: each gate axiom,
each ``tt``/``ff`` axiom, each conditional, and each atom of each identity
axiom.  Formulas are colored by the index of the synchronization point that
owns each atom, and every application (or pair elimination) adds the edges of
the match graph between the two formulas it connects.  The synchronous
machine gets stuck exactly when the resulting dependency graph has a cycle.

:func:`token_path_graph` rebuilds the same graph by walking the structural
transitions of the token machine, as an independent check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import networkx as nx

from .derivation import Position, TypingDerivation, node_positions
from .errors import ShapeMismatch
from .syntax import Lolli, Tensor, TypeExpr, atoms, polarity_in, pretty_type
from .tokenmachine import successor


@dataclass(frozen=True)
class ColoredFormula:
    """A type whose atoms, read left to right, carry the indices in ``colors``."""

    type: TypeExpr
    colors: tuple

    @staticmethod
    def uniform(t: TypeExpr, color: Optional[int]) -> "ColoredFormula":
        return ColoredFormula(t, tuple(color for _ in atoms(t)))

    def uncolored(self) -> TypeExpr:
        return self.type

    def split(self) -> tuple["ColoredFormula", "ColoredFormula"]:
        t = self.type
        left, right = (t.arg, t.res) if isinstance(t, Lolli) else (t.left, t.right)
        n = sum(1 for _ in atoms(left))
        return ColoredFormula(left, self.colors[:n]), ColoredFormula(right, self.colors[n:])

    def __str__(self) -> str:
        out = pretty_type(self.type)
        return f"{out} {list(self.colors)}"


def lolli(a: ColoredFormula, b: ColoredFormula) -> ColoredFormula:
    return ColoredFormula(Lolli(a.type, b.type), a.colors + b.colors)


def tensor(a: ColoredFormula, b: ColoredFormula) -> ColoredFormula:
    return ColoredFormula(Tensor(a.type, b.type), a.colors + b.colors)


@dataclass(frozen=True)
class DependencyGraph:
    vertices: frozenset = frozenset()
    edges: frozenset = frozenset()

    def __or__(self, other: "DependencyGraph") -> "DependencyGraph":
        return DependencyGraph(self.vertices | other.vertices, self.edges | other.edges)

    def to_dot(self, name: str = "G") -> str:
        lines = [f"digraph {name} {{"]
        for v in sorted(self.vertices):
            lines.append(f"  {v};")
        for a, b in sorted(self.edges):
            lines.append(f"  {a} -> {b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SyncPoint:
    index: int
    kind: str  # "gate" | "ite" | "axiom" | "constant"
    node: int
    atom: Optional[int] = None


def match_graph(a: ColoredFormula, b: ColoredFormula) -> DependencyGraph:
    """Edges between corresponding atoms of two formulas of the same shape.

    A negative atom colored i in ``a`` facing color j in ``b`` gives i -> j; a
    positive atom colored i in ``b`` facing color j in ``a`` gives i -> j.
    """
    if a.type != b.type:
        raise ShapeMismatch(f"{pretty_type(a.type)} vs {pretty_type(b.type)}")
    edges = set()
    for (path, _), ca, cb in zip(atoms(a.type), a.colors, b.colors):
        if ca is None or cb is None:
            continue
        if polarity_in(a.type, path) < 0:
            edges.add((ca, cb))
        else:
            edges.add((cb, ca))
    verts = {c for c in a.colors + b.colors if c is not None}
    return DependencyGraph(frozenset(verts), frozenset(edges))


# ---------------------------------------------------------------- indexing


def _ite_depth(d: TypingDerivation) -> dict[int, int]:
    depth = {}
    stack = [(d, 0)]
    while stack:
        n, k = stack.pop()
        depth[n.node_id] = k
        inner = k + 1 if n.rule == "Ite" else k
        for p in n.premises:
            stack.append((p, inner))
    return depth


def sync_points(d: TypingDerivation) -> list[SyncPoint]:
    """Synchronization points numbered from 1, outermost conditional level first,
    then in preorder, then atom by atom."""
    depth = _ite_depth(d)
    raw = []
    for n in d.nodes():
        if n.rule == "Op":
            raw.append((n.node_id, None, "gate"))
        elif n.rule == "BoolAx":
            raw.append((n.node_id, None, "constant"))
        elif n.rule == "Ite":
            raw.append((n.node_id, None, "ite"))
        elif n.rule == "Ax":
            for k, _ in enumerate(atoms(n.type)):
                raw.append((n.node_id, k, "axiom"))
    raw.sort(key=lambda r: (depth[r[0]], r[0], -1 if r[1] is None else r[1]))
    return [SyncPoint(i, kind, node, atom) for i, (node, atom, kind) in enumerate(raw, 1)]


# ---------------------------------------------------------------- colored inference


@dataclass(frozen=True, eq=False)
class ColoredDerivation:
    derivation: TypingDerivation
    sync_points: tuple
    context: dict = field(repr=False)  # node id -> {var: ColoredFormula}
    type: dict = field(repr=False)  # node id -> ColoredFormula
    graph: dict = field(repr=False)  # node id -> DependencyGraph

    def judgment(self, node: int) -> str:
        ctx = ", ".join(f"{x}:{a}" for x, a in self.context[node].items())
        return f"{ctx} |- {self.type[node]}"


def color_infer(d: TypingDerivation) -> tuple[ColoredDerivation, DependencyGraph]:
    points = sync_points(d)
    index = {(p.node, p.atom): p.index for p in points}
    ctxs: dict = {}
    types: dict = {}
    graphs: dict = {}

    def visit(n: TypingDerivation):
        for p in n.premises:
            visit(p)
        nid = n.node_id
        g = DependencyGraph()
        if n.rule == "Ax":
            x, a = n.context[0]
            cols = tuple(index[(nid, k)] for k, _ in enumerate(atoms(a)))
            cf = ColoredFormula(a, cols)
            ctx, ty = {x: cf}, cf
            g = DependencyGraph(frozenset(cols))
        elif n.rule in ("Op", "BoolAx"):
            i = index[(nid, None)]
            ctx, ty = {}, ColoredFormula.uniform(n.type, i)
            g = DependencyGraph(frozenset([i]))
        elif n.rule == "UnitIntro":
            ctx, ty = {}, ColoredFormula.uniform(n.type, None)
        elif n.rule == "Lam":
            m = n.premises[0].node_id
            inner = dict(ctxs[m])
            arg = inner.pop(n.term.name)
            ctx, ty = inner, lolli(arg, types[m])
            g = graphs[m]
        elif n.rule == "App":
            f, x = (p.node_id for p in n.premises)
            arg, res = types[f].split()
            ctx, ty = {**ctxs[f], **ctxs[x]}, res
            g = graphs[f] | graphs[x] | match_graph(arg, types[x])
        elif n.rule == "PairIntro":
            a, b = (p.node_id for p in n.premises)
            ctx, ty = {**ctxs[a], **ctxs[b]}, tensor(types[a], types[b])
            g = graphs[a] | graphs[b]
        elif n.rule == "LetStar":
            a, b = (p.node_id for p in n.premises)
            ctx, ty = {**ctxs[a], **ctxs[b]}, types[b]
            g = graphs[a] | graphs[b]
        elif n.rule == "LetPair":
            a, b = (p.node_id for p in n.premises)
            body = dict(ctxs[b])
            consumer = tensor(body.pop(n.term.x), body.pop(n.term.y))
            ctx, ty = {**ctxs[a], **body}, types[b]
            g = graphs[a] | graphs[b] | match_graph(consumer, types[a])
        elif n.rule == "Ite":
            i = index[(nid, None)]
            gd, th, el = (p.node_id for p in n.premises)
            branch = {x: ColoredFormula.uniform(cf.type, i) for x, cf in ctxs[th].items()}
            ctx, ty = {**ctxs[gd], **branch}, ColoredFormula.uniform(n.type, i)
            g = graphs[gd] | graphs[th] | graphs[el] | DependencyGraph(frozenset([i]))
        else:
            raise AssertionError(n.rule)
        # keep the context in the judgment's order
        ctxs[nid] = {x: ctx[x] for x, _ in n.context}
        types[nid] = ty
        graphs[nid] = g

    visit(d)
    cd = ColoredDerivation(d, tuple(points), ctxs, types, graphs)
    return cd, graphs[d.node_id]


# ---------------------------------------------------------------- cycles


def is_acyclic(g: DependencyGraph) -> tuple[bool, Optional[list]]:
    """(True, None) for acyclic graphs, else (False, vertices of one cycle)."""
    nxg = nx.DiGraph()
    nxg.add_nodes_from(g.vertices)
    nxg.add_edges_from(g.edges)
    try:
        cycle = nx.find_cycle(nxg)
    except nx.NetworkXNoCycle:
        return True, None
    return False, [a for a, _ in cycle]


def all_cycles(g: DependencyGraph, limit: int = 1000) -> list[list]:
    nxg = nx.DiGraph()
    nxg.add_nodes_from(g.vertices)
    nxg.add_edges_from(g.edges)
    out = []
    for c in nx.simple_cycles(nxg):
        out.append(c)
        if len(out) >= limit:
            break
    return out


# ---------------------------------------------------------------- token-path oracle


def _exits_and_entries(d: TypingDerivation, points: list[SyncPoint]):
    idx = d.index
    exits: dict[Position, int] = {}
    entries: dict[Position, int] = {}
    for sp in points:
        n = idx.node[sp.node]
        ps = node_positions(n)
        if sp.kind in ("gate", "constant"):
            own = ps
        elif sp.kind == "ite":
            guard_vars = n.premises[0].ctx
            own = [p for p in ps if p.side is None or p.side not in guard_vars]
        else:
            path = list(atoms(n.type))[sp.atom][0]
            own = [p for p in ps if p.path == path]
        for p in own:
            (exits if p.positive else entries)[p] = sp.index
    return exits, entries


def token_path_graph(d: TypingDerivation) -> DependencyGraph:
    """Follow structural moves from every exit of every synchronization point."""
    points = sync_points(d)
    exits, entries = _exits_and_entries(d, points)
    idx = d.index
    edges = set()
    for start, i in exits.items():
        p = start
        seen = set()
        while True:
            s = successor(idx, p)
            if s[0] != "move":
                break
            p = s[1]
            if p in entries:
                edges.add((i, entries[p]))
                break
            if p in seen:
                break
            seen.add(p)
    return DependencyGraph(frozenset(sp.index for sp in points), frozenset(edges))
