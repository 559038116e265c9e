"""Token machines that compile a typing derivation into an extended circuit.

Tokens sit on atom positions of the derivation, each tagged with the address
of the circuit branch it lives in.  Positive tokens travel down towards the
conclusion, negative ones travel up into premises.  Every move of a data token
renames its wire in the circuit at the token's address; gates fire once all
their inputs are present at a common address.

Conditionals are handled in two ways.  The asynchronous rule splits the
circuit on the guard bit as soon as it is known and duplicates every token at
that address.  The synchronous rule waits until all inputs of the conditional
have arrived, compiles both branches separately, and emits a single ``if``.
"""

from __future__ import annotations

import enum
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Optional

from .circuit import EMPTY, GateApp, Ite, Seq, gate, gates, items
from .derivation import (
    Position,
    TypingDerivation,
    label_key,
    labeling,
    node_positions,
    position_sets,
)
from .errors import Deadlock, InvalidMove, NonUniform, StepBudgetExceeded
from .extcircuit import (
    EMPTY_ADDRESS,
    Address,
    Branch,
    ExtendedCircuit,
    Leaf,
    addresses,
    at_address,
    ext_typecheck,
    env_leaves,
    size_ext,
    substitute_at,
    tau,
)
from .syntax import BIT, QBIT

DEFAULT_STEP_BUDGET = 10 ** 6
MODES = ("async-only", "sync-first", "sync-only")


def step_budget() -> int:
    raw = os.environ.get("GOIQC_STEP_BUDGET")
    return int(raw) if raw else DEFAULT_STEP_BUDGET


class RuleKind(enum.IntEnum):
    # declaration order is the scheduler priority
    Synchronous = 0
    CircuitGate = 1
    Structural = 2
    Guard = 3
    IteTransit = 4
    Asynchronous = 5


@dataclass(frozen=True)
class Token:
    position: Position
    address: Address = EMPTY_ADDRESS

    def __str__(self) -> str:
        return f"{self.position}@{self.address}"


# ---------------------------------------------------------------- structural transitions


def successor(idx, p: Position) -> tuple:
    """Where a token at ``p`` goes next, ignoring addresses.

    Returns one of ``("move", q, kind)``, ``("gate", node)``, ``("ite-up", node)``,
    ``("ite-down", node, q)``, ``("guard", node)``, ``("sink",)`` or ``("final",)``.
    """
    n = idx.node[p.node]
    pos = idx.pos
    if p.positive:
        parent_id = idx.parent[p.node]
        if parent_id is None:
            return ("final",)
        par = idx.node[parent_id]
        k = idx.slot[p.node]
        S = RuleKind.Structural
        if par.rule == "Lam":
            if p.side == par.term.name:
                return ("move", pos(par.node_id, None, (0,) + p.path), S)
            if p.side is not None:
                return ("move", pos(par.node_id, p.side, p.path), S)
            return ("move", pos(par.node_id, None, (1,) + p.path), S)
        if par.rule == "App":
            if p.side is not None:
                return ("move", pos(par.node_id, p.side, p.path), S)
            if k == 0:
                if p.path[0] == 1:
                    return ("move", pos(par.node_id, None, p.path[1:]), S)
                return ("move", pos(par.premises[1].node_id, None, p.path[1:]), S)
            return ("move", pos(par.premises[0].node_id, None, (0,) + p.path), S)
        if par.rule == "PairIntro":
            if p.side is not None:
                return ("move", pos(par.node_id, p.side, p.path), S)
            return ("move", pos(par.node_id, None, (k,) + p.path), S)
        if par.rule == "LetPair":
            x, y = par.term.x, par.term.y
            body = par.premises[1].node_id
            if k == 0:
                if p.side is not None:
                    return ("move", pos(par.node_id, p.side, p.path), S)
                side = x if p.path[0] == 0 else y
                return ("move", pos(body, side, p.path[1:]), S)
            if p.side == x:
                return ("move", pos(par.premises[0].node_id, None, (0,) + p.path), S)
            if p.side == y:
                return ("move", pos(par.premises[0].node_id, None, (1,) + p.path), S)
            return ("move", pos(par.node_id, p.side, p.path), S)
        if par.rule == "LetStar":
            if p.side is not None:
                return ("move", pos(par.node_id, p.side, p.path), S)
            if k == 0:
                return ("sink",)
            return ("move", pos(par.node_id, None, p.path), S)
        if par.rule == "Ite":
            if k == 0:
                if p.side is not None:
                    return ("move", pos(par.node_id, p.side, p.path), RuleKind.Guard)
                return ("guard", par.node_id)
            return ("ite-down", par.node_id, pos(par.node_id, p.side, p.path))
        raise AssertionError(f"rule {par.rule} has no premises")
    # negative: move up into the node
    S = RuleKind.Structural
    if n.rule == "Ax":
        if p.side is not None:
            return ("move", pos(n.node_id, None, p.path), S)
        return ("move", pos(n.node_id, n.context[0][0], p.path), S)
    if n.rule == "Op":
        return ("gate", n.node_id)
    if n.rule == "Lam":
        prem = n.premises[0].node_id
        if p.side is not None:
            return ("move", pos(prem, p.side, p.path), S)
        if p.path[0] == 0:
            return ("move", pos(prem, n.term.name, p.path[1:]), S)
        return ("move", pos(prem, None, p.path[1:]), S)
    if n.rule == "Ite":
        if p.side is not None and p.side in n.premises[0].ctx:
            return ("move", pos(n.premises[0].node_id, p.side, p.path), RuleKind.Guard)
        return ("ite-up", n.node_id)
    if p.side is not None:
        for prem in n.premises:
            if p.side in prem.ctx:
                return ("move", pos(prem.node_id, p.side, p.path), S)
        raise AssertionError(f"variable {p.side} is not in any premise")
    if n.rule == "App":
        return ("move", pos(n.premises[0].node_id, None, (1,) + p.path), S)
    if n.rule == "PairIntro":
        return ("move", pos(n.premises[p.path[0]].node_id, None, p.path[1:]), S)
    if n.rule in ("LetPair", "LetStar"):
        return ("move", pos(n.premises[1].node_id, None, p.path), S)
    raise AssertionError(f"no negative positions expected at {n.rule}")


# ---------------------------------------------------------------- machine context


class MachineContext:
    """Everything about a run that does not change from step to step."""

    def __init__(self, root: TypingDerivation, label_of: Callable[[Position], str],
                 mode: str = "sync-first", scheduler: str = "min",
                 budget: Optional[int] = None, check: bool = False):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        self.root = root
        self.idx = root.index
        self.label_of = label_of
        self.mode = mode
        self.scheduler = scheduler
        self.budget = budget if budget is not None else step_budget()
        self.check = check
        self.sets = position_sets(root)
        self._succ: dict = {}
        self._labels: dict = {}

    def label(self, p: Position) -> str:
        lab = self._labels.get(p)
        if lab is None:
            lab = self._labels[p] = self.label_of(p)
        return lab

    def succ(self, p: Position) -> tuple:
        s = self._succ.get(p)
        if s is None:
            s = self._succ[p] = successor(self.idx, p)
        return s

    def node(self, n: int) -> TypingDerivation:
        return self.idx.node[n]

    def negatives(self, n: int) -> list[Position]:
        return [p for p in node_positions(self.node(n)) if not p.positive]

    def ite_conclusion(self, n: int, positive: bool) -> list[Position]:
        """Branch-context and type positions of an ite conclusion with the given sign."""
        x = self.node(n)
        guard_vars = x.premises[0].ctx
        return [p for p in node_positions(x)
                if p.positive == positive and (p.side is None or p.side not in guard_vars)]

    def guard_position(self, n: int) -> Position:
        return self.idx.pos(self.node(n).premises[0].node_id, None, ())


@dataclass(frozen=True, eq=False)
class MachineConfig:
    derivation: TypingDerivation
    tokens: frozenset
    circuit: ExtendedCircuit
    meas_counter: int
    ctx: MachineContext = field(repr=False)

    def tokens_at(self, address: Address) -> list[Token]:
        return [t for t in self.tokens if t.address == address]


@dataclass(frozen=True)
class Move:
    kind: RuleKind
    token: Optional[Token] = None
    target: Optional[Position] = None
    node: Optional[int] = None
    address: Address = EMPTY_ADDRESS

    def key(self) -> tuple:
        pos = self.token.position if self.token is not None else None
        node = pos.node if pos is not None else self.node
        path = pos.key() if pos is not None else ()
        addr = tuple((label_key(k) if isinstance(k, str) else ("", k, ""), v)
                     for k, v in self.address.items)
        return (int(self.kind), node, path, addr)


# ---------------------------------------------------------------- leaf editing


def _rename_wire(c, old: str, new: str, kind: str):
    """Rename the live wire ``old`` to ``new`` at the end of leaf circuit ``c``."""
    parts = list(items(c)) if not (isinstance(c, Seq) and not c.parts) else []
    for k in range(len(parts) - 1, -1, -1):
        it = parts[k]
        if isinstance(it, GateApp):
            if old in it.outs:
                parts[k] = GateApp(it.gate, it.ins, tuple(new if x == old else x for x in it.outs),
                                   it.meas_index)
                return Seq(tuple(parts))
            if old in it.ins:
                break
        elif any(old in g.outs or old in g.ins for g in gates(it)) or getattr(it, "guard", None) == old:
            break
    parts.append(gate("idb" if kind == "bit" else "id", [old], [new]))
    return Seq(tuple(parts))


def _append(c, *new_items):
    parts = list(items(c)) if not (isinstance(c, Seq) and not c.parts) else []
    parts.extend(new_items)
    return Seq(tuple(parts))


def _const_gates(ctx: MachineContext, positions) -> list:
    out = []
    for p in sorted(positions, key=lambda p: p.key()):
        lit = ctx.node(p.node).term.value
        out.append(gate("one" if lit else "zero", [], [ctx.label(p)]))
    return out


# ---------------------------------------------------------------- init / moves / step


def init(d: TypingDerivation, mode: str = "sync-first", scheduler: str = "min",
         label_of: Optional[Callable] = None, budget: Optional[int] = None,
         check: bool = False, meas_counter: int = 0) -> MachineConfig:
    if label_of is None:
        lab = labeling(d)
        label_of = lab.__getitem__
    ctx = MachineContext(d, label_of, mode, scheduler, budget, check)
    s = ctx.sets
    start = s.ndata | s.nones | s.ones_down | s.consts_down
    tokens = frozenset(Token(p, EMPTY_ADDRESS) for p in start)
    circuit = Leaf(_append(EMPTY, *_const_gates(ctx, s.consts_down)))
    return MachineConfig(d, tokens, circuit, meas_counter, ctx)


def enabled_moves(cfg: MachineConfig) -> list[Move]:
    ctx = cfg.ctx
    moves: list[Move] = []
    at_gate: dict = defaultdict(set)
    guards: list = []
    for t in cfg.tokens:
        s = ctx.succ(t.position)
        kind = s[0]
        if kind == "move":
            moves.append(Move(s[2], t, s[1]))
        elif kind == "gate":
            at_gate[(s[1], t.address)].add(t.position)
        elif kind == "ite-up":
            x = ctx.node(s[1])
            b = t.address.get(ctx.label(ctx.guard_position(s[1])))
            if b is not None:
                prem = x.premises[1 if b == 1 else 2].node_id
                target = ctx.idx.pos(prem, t.position.side, t.position.path)
                moves.append(Move(RuleKind.IteTransit, t, target))
        elif kind == "ite-down":
            moves.append(Move(RuleKind.IteTransit, t, s[2]))
        elif kind == "guard":
            if ctx.label(t.position) not in t.address:
                guards.append((s[1], t))
    for (n, g), present in at_gate.items():
        if present.issuperset(ctx.negatives(n)):
            moves.append(Move(RuleKind.CircuitGate, node=n, address=g))
    asyncs = []
    for n, t in guards:
        if ctx.mode != "async-only":
            needed = ctx.ite_conclusion(n, positive=False)
            if all(Token(p, t.address) in cfg.tokens for p in needed):
                moves.append(Move(RuleKind.Synchronous, node=n, address=t.address))
        if ctx.mode != "sync-only":
            asyncs.append(Move(RuleKind.Asynchronous, node=n, address=t.address))
    if ctx.mode == "async-only" or not moves:
        moves.extend(asyncs)
    moves.sort(key=Move.key)
    return moves


def step(cfg: MachineConfig, move: Move) -> MachineConfig:
    ctx = cfg.ctx
    k = move.kind
    if k in (RuleKind.Structural, RuleKind.Guard, RuleKind.IteTransit):
        t = move.token
        if t not in cfg.tokens:
            raise InvalidMove(f"no token {t}")
        new_tok = Token(move.target, t.address)
        tokens = (cfg.tokens - {t}) | {new_tok}
        circuit = cfg.circuit
        if t.position.is_data:
            leaf = at_address(circuit, t.address)
            leaf = _rename_wire(leaf, ctx.label(t.position), ctx.label(move.target), t.position.kind)
            circuit = substitute_at(circuit, t.address, leaf)
        return MachineConfig(cfg.derivation, tokens, circuit, cfg.meas_counter, ctx)
    if k == RuleKind.CircuitGate:
        return _fire_gate(cfg, move)
    if k == RuleKind.Asynchronous:
        return _split(cfg, move)
    if k == RuleKind.Synchronous:
        return _synchronize(cfg, move)
    raise InvalidMove(f"unknown move {move}")


def _fire_gate(cfg: MachineConfig, move: Move) -> MachineConfig:
    ctx = cfg.ctx
    n = ctx.node(move.node)
    g = move.address
    ps = node_positions(n)
    neg = [p for p in ps if not p.positive]
    pos = [p for p in ps if p.positive]
    consumed = {Token(p, g) for p in neg}
    if not consumed <= cfg.tokens:
        raise InvalidMove(f"gate at node {n.node_id} is not saturated at {g}")
    ins = [ctx.label(p) for p in neg if p.is_data]
    outs = [ctx.label(p) for p in pos if p.is_data]
    counter = cfg.meas_counter
    idx = None
    if n.term.op == "meas":
        idx, counter = counter, counter + 1
    leaf = _append(at_address(cfg.circuit, g), gate(n.term.op, ins, outs, idx))
    tokens = (cfg.tokens - consumed) | {Token(p, g) for p in pos}
    return MachineConfig(cfg.derivation, frozenset(tokens), substitute_at(cfg.circuit, g, leaf),
                         counter, ctx)


def _split(cfg: MachineConfig, move: Move) -> MachineConfig:
    ctx = cfg.ctx
    x = ctx.node(move.node)
    g = move.address
    gp = ctx.guard_position(move.node)
    if Token(gp, g) not in cfg.tokens:
        raise InvalidMove(f"guard of node {x.node_id} is not ready at {g}")
    lab = ctx.label(gp)
    g1, g0 = g.extend(lab, 1), g.extend(lab, 0)
    tokens = set()
    for t in cfg.tokens:
        if t.address == g:
            tokens.add(Token(t.position, g1))
            tokens.add(Token(t.position, g0))
        else:
            tokens.add(t)
    leaves = []
    for prem, addr in ((x.premises[1], g1), (x.premises[2], g0)):
        sets = position_sets(prem)
        tokens.update(Token(p, addr) for p in sets.ones_down | sets.consts_down)
        leaves.append(Leaf(_append(EMPTY, *_const_gates(ctx, sets.consts_down))))
    node = Branch(at_address(cfg.circuit, g), lab, leaves[0], leaves[1])
    return MachineConfig(cfg.derivation, frozenset(tokens), substitute_at(cfg.circuit, g, node),
                         cfg.meas_counter, ctx)


def _synchronize(cfg: MachineConfig, move: Move) -> MachineConfig:
    ctx = cfg.ctx
    x = ctx.node(move.node)
    g = move.address
    gp = ctx.guard_position(move.node)
    neg = ctx.ite_conclusion(move.node, positive=False)
    posi = ctx.ite_conclusion(move.node, positive=True)
    consumed = {Token(p, g) for p in neg} | {Token(gp, g)}
    if not consumed <= cfg.tokens:
        raise InvalidMove(f"conditional at node {x.node_id} is not saturated at {g}")
    counter = cfg.meas_counter
    flat = []
    for prem in (x.premises[1], x.premises[2]):
        # conclusion positions of the branch share wires with the conditional's conclusion
        outer = {p: ctx.label(ctx.idx.pos(x.node_id, p.side, p.path))
                 for p in node_positions(prem)}
        parent_label = ctx.label

        def label_of(p, outer=outer, parent_label=parent_label):
            lab = outer.get(p)
            return lab if lab is not None else parent_label(p)

        child = run_config(init(prem, ctx.mode, ctx.scheduler, label_of, ctx.budget,
                                ctx.check, counter))
        counter = child.meas_counter
        env_in = {label_of(p): (BIT if p.kind == "bit" else QBIT) for p in child.ctx.sets.ndata}
        try:
            flat.append(tau(child.circuit, env_in))
        except NonUniform as exc:
            raise AssertionError(f"branch circuit is not uniform: {exc}") from exc
    lab = ctx.label(gp)
    leaf = _append(at_address(cfg.circuit, g), Ite(lab, flat[0], flat[1]))
    tokens = (cfg.tokens - consumed) | {Token(p, g) for p in posi}
    return MachineConfig(cfg.derivation, frozenset(tokens), substitute_at(cfg.circuit, g, leaf),
                         counter, ctx)


# ---------------------------------------------------------------- running


def is_final(cfg: MachineConfig) -> bool:
    """Every token rests at the conclusion, at a guard, or in a discarded unit."""
    ctx = cfg.ctx
    for t in cfg.tokens:
        kind = ctx.succ(t.position)[0]
        if kind not in ("final", "sink", "guard"):
            return False
    return True


def _pick(cfg: MachineConfig, moves: list) -> Move:
    return moves[-1] if cfg.ctx.scheduler == "max" else moves[0]


def run_config(cfg: MachineConfig, trace: Optional[list] = None) -> MachineConfig:
    """Step ``cfg`` until no move applies; raise Deadlock if tokens are left waiting."""
    steps = 0
    while True:
        moves = enabled_moves(cfg)
        if not moves:
            if is_final(cfg):
                return cfg
            raise Deadlock(f"no move applies in mode {cfg.ctx.mode}; "
                           f"{len(cfg.tokens)} tokens are stuck", cfg)
        steps += 1
        if steps > cfg.ctx.budget:
            raise StepBudgetExceeded(f"more than {cfg.ctx.budget} steps")
        move = _pick(cfg, moves)
        cfg = step(cfg, move)
        if cfg.ctx.check:
            check_config(cfg)
        if trace is not None:
            trace.append({
                "step": steps,
                "ruleKind": move.kind.name,
                "before": str(move.token) if move.token else f"node {move.node}@{move.address}",
                "after": (str(Token(move.target, move.token.address)) if move.token
                          else f"{len(cfg.tokens)} tokens"),
                "circuitSize": size_ext(cfg.circuit),
            })


@dataclass(frozen=True, eq=False)
class RunResult:
    config: MachineConfig
    deadlocked: bool

    @property
    def circuit(self) -> ExtendedCircuit:
        return self.config.circuit


def run(d: TypingDerivation, mode: str = "sync-first", scheduler: str = "min",
        trace: Optional[list] = None, check: bool = False,
        budget: Optional[int] = None) -> RunResult:
    cfg = init(d, mode, scheduler, budget=budget, check=check)
    try:
        return RunResult(run_config(cfg, trace), False)
    except Deadlock as exc:
        return RunResult(exc.config if exc.config is not None else cfg, True)


def execute(d: TypingDerivation, mode: str = "sync-first") -> tuple[frozenset, ExtendedCircuit]:
    """Run ``d`` to its final configuration and return its tokens and circuit."""
    cfg = run_config(init(d, mode))
    return cfg.tokens, cfg.circuit


# ---------------------------------------------------------------- invariants and outputs


def input_env(cfg_or_ctx) -> dict:
    ctx = cfg_or_ctx.ctx if isinstance(cfg_or_ctx, MachineConfig) else cfg_or_ctx
    return {ctx.label(p): (BIT if p.kind == "bit" else QBIT) for p in ctx.sets.ndata}


def output_env(cfg_or_ctx) -> dict:
    ctx = cfg_or_ctx.ctx if isinstance(cfg_or_ctx, MachineConfig) else cfg_or_ctx
    return {ctx.label(p): (BIT if p.kind == "bit" else QBIT) for p in ctx.sets.pdata}


def token_env(cfg: MachineConfig, address: Address) -> dict:
    """Wires carried by the data tokens at ``address``; split guards no longer count."""
    ctx = cfg.ctx
    out = {}
    for t in cfg.tokens:
        if t.address != address or not t.position.is_data:
            continue
        lab = ctx.label(t.position)
        if ctx.succ(t.position)[0] == "guard" and lab in address:
            continue
        out[lab] = BIT if t.position.kind == "bit" else QBIT
    return out


def check_config(cfg: MachineConfig) -> None:
    """Assert that the circuit types from the inputs to the tokens' wires at every leaf."""
    shape = ext_typecheck(cfg.circuit, input_env(cfg))
    leaf_envs = dict(zip(addresses(cfg.circuit), env_leaves(shape)))
    for t in cfg.tokens:
        if t.address not in leaf_envs:
            raise AssertionError(f"token {t} lives at an address the circuit lacks")
    for g, env in leaf_envs.items():
        expected = tuple(sorted(token_env(cfg, g).items(), key=lambda kv: label_key(kv[0])))
        if env != expected:
            raise AssertionError(f"at {g}: circuit gives {env}, tokens carry {expected}")


def compile_derivation(d: TypingDerivation, mode: str = "sync-first", scheduler: str = "min"):
    """Run the machine and flatten the result; returns (circuit, input env, output env)."""
    res = run(d, mode, scheduler)
    if res.deadlocked:
        raise Deadlock(f"compilation deadlocks in mode {mode}", res.config)
    env_in = input_env(res.config)
    return tau(res.circuit, env_in), env_in, output_env(res.config)
