"""Reference semantics, independent of circuit generation.

Two evaluators live here.  ``eval_full`` runs the call-by-value reduction of
quantum closures ``[Q, L, M]`` and expands every measurement, producing the
exact distribution of value states.  ``qmsiam_run`` drives the token machine
over a quantum and classical register instead of emitting a circuit, again
exploring every measurement outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .circuit import GATES
from .cpm import CpmState, QCRegister, mix_dist
from .derivation import TypingDerivation, infer, label_key, labeling, node_positions
from .errors import InvalidMove, NotBoolean, Stuck, StepBudgetExceeded
from .syntax import (
    BIT,
    QBIT,
    App,
    Bit,
    BoolLit,
    Const,
    Ite,
    Lam,
    LetPair,
    LetStar,
    Pair,
    Qbit,
    Star,
    Term,
    TypeExpr,
    Var,
    pretty,
    pretty_type,
)
from .tokenmachine import (
    MachineConfig,
    RuleKind,
    Token,
    _pick,
    enabled_moves,
    init,
    is_final,
    step_budget,
)

TOL = 1e-9
PRUNE = 1e-14


# ---------------------------------------------------------------- distributions


@dataclass(frozen=True)
class PseudoDistribution:
    """Finitely many values with probabilities summing to one."""

    items: tuple = ()

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def total(self) -> float:
        return float(sum(w for _, w in self.items))

    def values(self) -> list:
        return [v for v, _ in self.items]

    def weights(self) -> list:
        return [w for _, w in self.items]


# ---------------------------------------------------------------- closures


@dataclass(frozen=True, eq=False)
class QuantumClosure:
    """``Q`` is a state over the quantum variables ``L`` (first variable = most significant)."""

    Q: np.ndarray
    L: tuple
    M: Term
    fresh: int = field(default=0, compare=False)

    @staticmethod
    def of(term: Term) -> "QuantumClosure":
        return QuantumClosure(np.ones(1, complex), (), term)

    def is_value(self) -> bool:
        return is_value(self.M)

    def __str__(self) -> str:
        amps = " + ".join(f"({a:.3g})|{k:0{len(self.L)}b}>" for k, a in enumerate(self.Q)
                          if abs(a) > 1e-12) or "0"
        return f"[{amps}, [{', '.join(self.L)}], {pretty(self.M)}]"


def is_value(t: Term) -> bool:
    if isinstance(t, (Var, Lam, Star, BoolLit, Const)):
        return True
    return isinstance(t, Pair) and is_value(t.fst) and is_value(t.snd)


def substitute(t: Term, x: str, v: Term) -> Term:
    """``t[v/x]``; ``v`` is closed apart from quantum variables, so no capture can occur."""
    if isinstance(t, Var):
        return v if t.name == x else t
    if isinstance(t, Lam):
        return t if t.name == x else Lam(t.name, substitute(t.body, x, v))
    if isinstance(t, App):
        return App(substitute(t.fun, x, v), substitute(t.arg, x, v))
    if isinstance(t, Pair):
        return Pair(substitute(t.fst, x, v), substitute(t.snd, x, v))
    if isinstance(t, LetStar):
        return LetStar(substitute(t.bound, x, v), substitute(t.body, x, v))
    if isinstance(t, LetPair):
        bound = substitute(t.bound, x, v)
        body = t.body if x in (t.x, t.y) else substitute(t.body, x, v)
        return LetPair(t.x, t.y, bound, body)
    if isinstance(t, Ite):
        return Ite(substitute(t.guard, x, v), substitute(t.then_branch, x, v),
                   substitute(t.else_branch, x, v))
    return t


def _tuple_vars(v: Term) -> list[str]:
    if isinstance(v, Var):
        return [v.name]
    if isinstance(v, Pair):
        return _tuple_vars(v.fst) + _tuple_vars(v.snd)
    raise Stuck(f"gate argument {pretty(v)} is not a tuple of qubits")


def _rebuild(names: list[str]) -> Term:
    if len(names) == 1:
        return Var(names[0])
    return Pair(Var(names[0]), _rebuild(names[1:]))


def _apply_unitary(Q: np.ndarray, L: tuple, u: np.ndarray, names: list[str]) -> np.ndarray:
    n = len(L)
    k = len(names)
    axes = [L.index(x) for x in names]
    psi = Q.reshape((2,) * n)
    out = np.tensordot(u.reshape((2,) * (2 * k)), psi, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the gate's outputs first; move them back in place
    rest = [a for a in range(n) if a not in axes]
    order = [0] * n
    for j, a in enumerate(axes):
        order[a] = j
    for j, a in enumerate(rest):
        order[a] = k + j
    return np.ascontiguousarray(np.transpose(out, order)).ravel()


def _contract(cl: QuantumClosure, f: Term, a: Term) -> list:
    Q, L = cl.Q, cl.L
    if isinstance(f, Lam):
        return [(QuantumClosure(Q, L, substitute(f.body, f.name, a), cl.fresh), 1.0)]
    if not isinstance(f, Const):
        raise Stuck(f"cannot apply {pretty(f)}")
    op = f.op
    if op in ("zero", "one"):
        if not isinstance(a, Star):
            raise Stuck(f"{op} expects *")
        return [(QuantumClosure(Q, L, BoolLit(op == "one"), cl.fresh), 1.0)]
    if op == "discard":
        if not isinstance(a, BoolLit):
            raise Stuck("discard expects a bit value")
        return [(QuantumClosure(Q, L, Star(), cl.fresh), 1.0)]
    if op == "new":
        if not isinstance(a, BoolLit):
            raise Stuck("new expects a bit value")
        y = f"q#{cl.fresh}"
        ket = np.array([0, 1] if a.value else [1, 0], complex)
        return [(QuantumClosure(np.kron(Q, ket), L + (y,), Var(y), cl.fresh + 1), 1.0)]
    if op == "meas":
        if not isinstance(a, Var) or a.name not in L:
            raise Stuck("meas expects a qubit variable")
        k = L.index(a.name)
        psi = np.moveaxis(Q.reshape((2,) * len(L)), k, 0)
        rest = L[:k] + L[k + 1:]
        out = []
        for b in (0, 1):
            part = np.ascontiguousarray(psi[b]).ravel()
            w = float(np.vdot(part, part).real)
            if w > PRUNE:
                out.append((QuantumClosure(part / np.sqrt(w), rest, BoolLit(bool(b)), cl.fresh), w))
        return out
    gd = GATES.get(op)
    if gd is None or gd.matrix is None:
        raise Stuck(f"unknown constant {op}")
    names = _tuple_vars(a)
    if len(names) != len(gd.inputs) or any(x not in L for x in names):
        raise Stuck(f"{op} applied to {pretty(a)}")
    return [(QuantumClosure(_apply_unitary(Q, L, gd.matrix, names), L, _rebuild(names), cl.fresh), 1.0)]


def _reduce(cl: QuantumClosure, t: Term, plug: Callable[[Term], Term]) -> Optional[list]:
    """Reduce the leftmost redex of ``t``; ``plug`` rebuilds the whole term around it."""
    if is_value(t):
        return None
    if isinstance(t, App):
        r = _reduce(cl, t.fun, lambda m: plug(App(m, t.arg)))
        if r is not None:
            return r
        r = _reduce(cl, t.arg, lambda m: plug(App(t.fun, m)))
        if r is not None:
            return r
        return [(QuantumClosure(c.Q, c.L, plug(c.M), c.fresh), w) for c, w in _contract(cl, t.fun, t.arg)]
    if isinstance(t, Pair):
        r = _reduce(cl, t.fst, lambda m: plug(Pair(m, t.snd)))
        return r if r is not None else _reduce(cl, t.snd, lambda m: plug(Pair(t.fst, m)))
    if isinstance(t, LetStar):
        r = _reduce(cl, t.bound, lambda m: plug(LetStar(m, t.body)))
        if r is not None:
            return r
        if not isinstance(t.bound, Star):
            raise Stuck("let * expects *")
        return [(QuantumClosure(cl.Q, cl.L, plug(t.body), cl.fresh), 1.0)]
    if isinstance(t, LetPair):
        r = _reduce(cl, t.bound, lambda m: plug(LetPair(t.x, t.y, m, t.body)))
        if r is not None:
            return r
        if not isinstance(t.bound, Pair):
            raise Stuck("let pair expects a pair")
        body = substitute(substitute(t.body, t.x, t.bound.fst), t.y, t.bound.snd)
        return [(QuantumClosure(cl.Q, cl.L, plug(body), cl.fresh), 1.0)]
    if isinstance(t, Ite):
        r = _reduce(cl, t.guard, lambda m: plug(Ite(m, t.then_branch, t.else_branch)))
        if r is not None:
            return r
        if not isinstance(t.guard, BoolLit):
            raise Stuck("if expects a bit value")
        chosen = t.then_branch if t.guard.value else t.else_branch
        return [(QuantumClosure(cl.Q, cl.L, plug(chosen), cl.fresh), 1.0)]
    raise Stuck(f"no rule applies to {pretty(t)}")


def eval_step(cl: QuantumClosure):
    """One reduction step: a distribution of closures, or the closure itself when it is a value."""
    if cl.is_value():
        return cl
    out = _reduce(cl, cl.M, lambda m: m)
    return PseudoDistribution(tuple(out))


def closure_type(cl: QuantumClosure) -> TypeExpr:
    """Re-typecheck a closure: quantum variables are qubits."""
    return infer(cl.M, {x: QBIT for x in cl.L}).type


def _same_closure(a: QuantumClosure, b: QuantumClosure, tol: float) -> bool:
    return (a.L == b.L and a.M == b.M and a.Q.shape == b.Q.shape
            and np.max(np.abs(a.Q - b.Q), initial=0.0) <= tol)


def eval_full(cl: QuantumClosure, budget: Optional[int] = None,
              check_types: bool = False) -> PseudoDistribution:
    """Expand every reduction path and collect value states, merging equal ones."""
    budget = budget if budget is not None else step_budget()
    expected = closure_type(cl) if check_types else None
    work = [(cl, 1.0)]
    done: list = []
    steps = 0
    while work:
        c, w = work.pop()
        while not c.is_value():
            steps += 1
            if steps > budget:
                raise StepBudgetExceeded(f"more than {budget} reduction steps")
            nxt = eval_step(c)
            total = sum(p for _, p in nxt)
            if abs(total - 1.0) > 1e-12:
                raise AssertionError(f"step weights sum to {total}")
            if check_types:
                for d, _ in nxt:
                    if closure_type(d) != expected:
                        raise AssertionError(f"type changed along {pretty(d.M)}")
            (c, p), rest = nxt.items[0], nxt.items[1:]
            work.extend((d, w * q) for d, q in rest)
            w *= p
        for k, (d, v) in enumerate(done):
            if _same_closure(d, c, 1e-12):
                done[k] = (d, v + w)
                break
        else:
            done.append((c, w))
    done.sort(key=lambda cw: (pretty(cw[0].M), cw[0].L, -cw[1]))
    return PseudoDistribution(tuple(done))


# ---------------------------------------------------------------- closures vs registers


def _split_value(v: Term, t: TypeExpr, path: tuple) -> Term:
    for s in path:
        if not isinstance(v, Pair):
            raise Stuck(f"value {pretty(v)} does not match its type")
        v = v.fst if s == 0 else v.snd
    return v


def root_labels(d: TypingDerivation, side: Optional[str] = None) -> list[tuple]:
    """(path, label, atom type) of the data atoms of ``side`` in the root judgment."""
    lab = labeling(d)
    out = []
    for p in node_positions(d):
        if p.side == side and p.is_data:
            ty = BIT if p.kind == "bit" else QBIT
            out.append((p.path, lab[p], ty))
    return out


def argument_count(t: TypeExpr) -> int:
    """How many Boolean arguments a term of type ``t`` takes before returning a Boolean value."""
    from .syntax import Lolli, is_boolean

    k = 0
    while isinstance(t, Lolli):
        if not is_boolean(t.arg):
            raise NotBoolean(f"argument type {pretty_type(t.arg)} is not Boolean")
        t, k = t.res, k + 1
    if not is_boolean(t):
        raise NotBoolean(f"result type {pretty_type(t)} is not Boolean")
    return k


def _result_type(t: TypeExpr, k: int) -> TypeExpr:
    for _ in range(k):
        t = t.res
    return t


def closure_register(cl: QuantumClosure, d: TypingDerivation) -> QCRegister:
    """Read a value state as a register over the output wires of ``d``."""
    if not cl.is_value():
        raise Stuck("only value states have a register reading")
    k = argument_count(d.type)
    prefix = (1,) * k
    name_of: dict = {}
    bits: dict = {}
    for path, label, ty in root_labels(d):
        if path[:k] != prefix:
            continue
        leaf = _split_value(cl.M, d.type, path[k:])
        if isinstance(ty, Bit):
            if not isinstance(leaf, BoolLit):
                raise Stuck(f"expected a bit value at {label}")
            bits[label] = int(leaf.value)
        else:
            if not isinstance(leaf, Var):
                raise Stuck(f"expected a qubit at {label}")
            name_of[leaf.name] = label
    if set(name_of) != set(cl.L):
        raise Stuck("the value does not account for every qubit of the closure")
    L = [(name_of[x], QBIT) for x in cl.L] + [(b, BIT) for b in bits]
    return QCRegister.make(L, cl.Q, bits)


def _value_for(t: TypeExpr, path: tuple, leaf_of: dict) -> Term:
    from .syntax import Lolli, Tensor, Unit

    if isinstance(t, Tensor):
        return Pair(_value_for(t.left, path + (0,), leaf_of), _value_for(t.right, path + (1,), leaf_of))
    if isinstance(t, Unit):
        return Star()
    if isinstance(t, Lolli):
        raise NotBoolean("inputs of higher type cannot be read from a register")
    return leaf_of[path]


def register_closure(m: QCRegister, d: TypingDerivation) -> QuantumClosure:
    """The closure that feeds the register ``m`` to ``d``.

    Wires of the free variables are substituted in; wires of the leading
    arguments of a function type are passed as arguments.
    """
    term = d.term
    qnames: dict = {}
    vals = dict(m.v)

    def leaves(side, prefix):
        leaf_of = {}
        for path, label, ty in root_labels(d, side):
            if path[:len(prefix)] != prefix:
                continue
            rest = path[len(prefix):]
            if isinstance(ty, Bit):
                leaf_of[rest] = BoolLit(bool(vals[label]))
            else:
                qnames[label] = f"q#in{len(qnames)}"
                leaf_of[rest] = Var(qnames[label])
        return leaf_of

    for x, a in d.context:
        term = substitute(term, x, _value_for(a, (), leaves(x, ())))
    t = d.type
    for j in range(argument_count(d.type)):
        term = App(term, _value_for(t.arg, (), leaves(None, (1,) * j + (0,))))
        t = t.res
    order = [x for x, ty in m.L if isinstance(ty, Qbit)]
    missing = [x for x in order if x not in qnames]
    if missing or len(order) != len(qnames):
        raise InvalidMove(f"register wires {order} do not match the inputs of the term")
    L = tuple(qnames[x] for x in order)
    return QuantumClosure(np.asarray(m.Q, complex), L, term, 0)


# ---------------------------------------------------------------- the register machine


@dataclass(frozen=True, eq=False)
class _RState:
    cfg: MachineConfig
    qlabels: tuple
    Q: np.ndarray
    bits: tuple  # sorted ((label, value), ...)

    def register(self) -> QCRegister:
        L = [(x, QBIT) for x in self.qlabels] + [(b, BIT) for b, _ in self.bits]
        return QCRegister.make(L, self.Q, dict(self.bits))


def _with(st: _RState, cfg=None, qlabels=None, Q=None, bits=None) -> _RState:
    return _RState(cfg if cfg is not None else st.cfg,
                   qlabels if qlabels is not None else st.qlabels,
                   Q if Q is not None else st.Q,
                   tuple(sorted(bits.items(), key=lambda kv: label_key(kv[0])))
                   if bits is not None else st.bits)


def _rename(st: _RState, old: str, new: str) -> tuple:
    bits = dict(st.bits)
    if old in bits:
        bits[new] = bits.pop(old)
        return st.qlabels, bits
    if old not in st.qlabels:
        raise InvalidMove(f"register has no wire {old}")
    return tuple(new if x == old else x for x in st.qlabels), bits


def _gate_on_register(st: _RState, op: str, ins: list, outs: list) -> list:
    """Apply ``op`` to the register; returns (state pieces, weight) pairs."""
    bits = dict(st.bits)
    ql, Q = st.qlabels, st.Q
    if op in ("zero", "one"):
        bits[outs[0]] = int(op == "one")
        return [((ql, Q, bits), 1.0)]
    if op == "discard":
        bits.pop(ins[0])
        return [((ql, Q, bits), 1.0)]
    if op == "new":
        b = bits.pop(ins[0])
        ket = np.array([0, 1] if b else [1, 0], complex)
        return [((ql + (outs[0],), np.kron(Q, ket), bits), 1.0)]
    if op == "meas":
        k = ql.index(ins[0])
        psi = np.moveaxis(Q.reshape((2,) * len(ql)), k, 0)
        rest = ql[:k] + ql[k + 1:]
        out = []
        for b in (0, 1):
            part = np.ascontiguousarray(psi[b]).ravel()
            w = float(np.vdot(part, part).real)
            if w > PRUNE:
                out.append(((rest, part / np.sqrt(w), {**bits, outs[0]: b}), w))
        return out
    u = GATES[op].matrix
    Q2 = _apply_unitary(Q, ql, u, list(ins))
    mapping = dict(zip(ins, outs))
    return [((tuple(mapping.get(x, x) for x in ql), Q2, bits), 1.0)]


def _machine_step(st: _RState) -> Optional[list]:
    cfg = st.cfg
    ctx = cfg.ctx
    moves = enabled_moves(cfg)
    if not moves:
        return None
    move = _pick(cfg, moves)
    if move.kind in (RuleKind.Structural, RuleKind.Guard, RuleKind.IteTransit):
        t = move.token
        tokens = (cfg.tokens - {t}) | {Token(move.target, t.address)}
        ql, bits = st.qlabels, dict(st.bits)
        if t.position.is_data:
            ql, bits = _rename(st, ctx.label(t.position), ctx.label(move.target))
        new_cfg = MachineConfig(cfg.derivation, frozenset(tokens), cfg.circuit, cfg.meas_counter, ctx)
        return [(_with(st, new_cfg, ql, None, bits), 1.0)]
    if move.kind == RuleKind.CircuitGate:
        n = ctx.node(move.node)
        ps = node_positions(n)
        neg = [p for p in ps if not p.positive]
        posi = [p for p in ps if p.positive]
        g = move.address
        tokens = (cfg.tokens - {Token(p, g) for p in neg}) | {Token(p, g) for p in posi}
        new_cfg = MachineConfig(cfg.derivation, frozenset(tokens), cfg.circuit, cfg.meas_counter, ctx)
        ins = [ctx.label(p) for p in neg if p.is_data]
        outs = [ctx.label(p) for p in posi if p.is_data]
        return [(_RState(new_cfg, ql, Q, tuple(sorted(b.items(), key=lambda kv: label_key(kv[0])))), w)
                for (ql, Q, b), w in _gate_on_register(st, n.term.op, ins, outs)]
    if move.kind == RuleKind.Asynchronous:
        # the guard's value is in the register: follow that branch only
        x = ctx.node(move.node)
        g = move.address
        lab = ctx.label(ctx.guard_position(move.node))
        bits = dict(st.bits)
        b = bits.pop(lab)
        g2 = g.extend(lab, b)
        tokens = {Token(t.position, g2) if t.address == g else t for t in cfg.tokens}
        from .derivation import position_sets

        sets = position_sets(x.premises[1 if b == 1 else 2])
        tokens.update(Token(p, g2) for p in sets.ones_down | sets.consts_down)
        for p in sets.consts_down:
            bits[ctx.label(p)] = int(ctx.node(p.node).term.value)
        new_cfg = MachineConfig(cfg.derivation, frozenset(tokens), cfg.circuit, cfg.meas_counter, ctx)
        return [(_with(st, new_cfg, None, None, bits), 1.0)]
    raise InvalidMove(f"the register machine has no {move.kind.name} rule")


def qmsiam_run(d: TypingDerivation, m: Optional[QCRegister] = None,
               budget: Optional[int] = None, scheduler: str = "min") -> PseudoDistribution:
    """Every final (tokens, register) pair with its probability."""
    cfg0 = init(d, "async-only", scheduler, budget=budget)
    budget = cfg0.ctx.budget
    if m is None:
        m = QCRegister.make([], np.ones(1, complex), {})
    env_in = {cfg0.ctx.label(p) for p in cfg0.ctx.sets.ndata}
    if {x for x, _ in m.L} != env_in:
        raise InvalidMove(f"register labels {sorted(x for x, _ in m.L)} differ from the inputs "
                          f"{sorted(env_in, key=label_key)}")
    bits = dict(m.v)
    for p in cfg0.ctx.sets.consts_down:
        bits[cfg0.ctx.label(p)] = int(cfg0.ctx.node(p.node).term.value)
    start = _RState(cfg0, tuple(x for x, t in m.L if isinstance(t, Qbit)),
                    np.asarray(m.Q, complex).ravel(),
                    tuple(sorted(bits.items(), key=lambda kv: label_key(kv[0]))))
    work = [(start, 1.0)]
    done = []
    steps = 0
    while work:
        st, w = work.pop()
        while True:
            steps += 1
            if steps > budget:
                raise StepBudgetExceeded(f"more than {budget} machine steps")
            nxt = _machine_step(st)
            if nxt is None:
                break
            (st, p), rest = nxt[0], nxt[1:]
            work.extend((s, w * q) for s, q in rest)
            w *= p
        if not is_final(st.cfg):
            raise Stuck("the register machine stopped before reaching a final configuration")
        positions = frozenset(t.position for t in st.cfg.tokens)
        done.append(((positions, st.register()), w))
    return PseudoDistribution(tuple(done))


# ---------------------------------------------------------------- comparison


def _state_close(a, b, tol: float) -> bool:
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(_state_close(x, y, tol) for x, y in zip(a, b))
    if isinstance(a, QuantumClosure) and isinstance(b, QuantumClosure):
        if a.L != b.L or a.M != b.M:
            return False
        ra, rb = np.outer(a.Q, a.Q.conj()), np.outer(b.Q, b.Q.conj())
        return _trace_norm(ra - rb) / 2 <= tol
    if isinstance(a, QCRegister) and isinstance(b, QCRegister):
        ca, cb = a.canonical(), b.canonical()
        if ca.L != cb.L or ca.v != cb.v:
            return False
        ra, rb = np.outer(ca.Q, ca.Q.conj()), np.outer(cb.Q, cb.Q.conj())
        return _trace_norm(ra - rb) / 2 <= tol
    return a == b


def _trace_norm(m: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2)).sum())


def canonicalize(d: Iterable, tol: float = TOL) -> list:
    merged: list = []
    for v, w in d:
        for k, (u, x) in enumerate(merged):
            if _state_close(u, v, tol):
                merged[k] = (u, x + w)
                break
        else:
            merged.append((v, w))
    return merged


def dist_equal(d1, d2, tol: float = TOL) -> bool:
    a, b = canonicalize(d1, tol), canonicalize(d2, tol)
    if len(a) != len(b):
        return False
    unused = list(b)
    for v, w in a:
        for k, (u, x) in enumerate(unused):
            if _state_close(v, u, tol) and abs(w - x) <= tol:
                del unused[k]
                break
        else:
            return False
    return True


def closure_mix(dist: PseudoDistribution, d: TypingDerivation) -> CpmState:
    return mix_dist([(closure_register(c, d), w) for c, w in dist])


def machine_mix(dist: PseudoDistribution) -> CpmState:
    return mix_dist([(reg, w) for (_, reg), w in dist])
