"""Removing classical conditionals from circuits.

``if l {D} else {E}`` becomes a plain circuit that runs both branches: the
inputs are conditionally swapped into zero-initialized shadow wires, a renamed
copy ``D'`` works on the shadows while ``E`` works on the real wires, and the
outputs are conditionally swapped back.  Whatever ends up on the shadow side is
measured and discarded.  The rewrite is linear in the size of the circuit.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .circuit import (
    EMPTY,
    Circuit,
    Environment,
    GateApp,
    Ite,
    Seq,
    gate,
    gates,
    infer_inputs,
    rename,
    seq,
    typecheck_circuit,
)
from .derivation import label_key
from .errors import BranchEnvMismatch, IllTyped, ShapeMismatch
from .syntax import BIT, QBIT, TypeExpr


def sigma(labels: tuple, base: TypeExpr) -> Circuit:
    """Swap wires ``l1`` and ``l2`` when the bit ``l3`` is 1; ``l3`` survives."""
    l1, l2, l3 = labels
    core = seq(gate("new", [l3], [l3]), gate("CSWAP", labels, labels), gate("meas", [l3], [l3]))
    if base == QBIT:
        return core
    if base == BIT:
        return seq(gate("new", [l1], [l1]), gate("new", [l2], [l2]), core,
                   gate("meas", [l1], [l1]), gate("meas", [l2], [l2]))
    raise ShapeMismatch(f"cannot swap wires of type {base}")


@dataclass(frozen=True)
class SwapPlan:
    """Pairs (a, b, type) swapped under the guard bit."""

    pairs: tuple
    guard: str

    @staticmethod
    def of(first: Environment, second: Environment, guard: str) -> "SwapPlan":
        """Pair two environments entry by entry, in label order."""
        if len(first) != len(second):
            raise ShapeMismatch(f"environments of sizes {len(first)} and {len(second)}")
        a = sorted(first, key=label_key)
        b = sorted(second, key=label_key)
        pairs = []
        for x, y in zip(a, b):
            if first[x] != second[y]:
                raise ShapeMismatch(f"{x}:{first[x]} cannot be swapped with {y}:{second[y]}")
            pairs.append((x, y, first[x]))
        return SwapPlan(tuple(pairs), guard)

    def circuit(self) -> Circuit:
        return seq(*(sigma((a, b, self.guard), t) for a, b, t in self.pairs)) if self.pairs else EMPTY


def tau_swap(first, second, guard: str) -> Circuit:
    """Swap two environments when ``guard`` holds 1.

    Either argument may be a dict or a list of (label, type) pairs; lists keep
    their order, dicts are paired in label order.
    """
    if isinstance(first, dict) and isinstance(second, dict):
        return SwapPlan.of(first, second, guard).circuit()
    first, second = list(first), list(second)
    if len(first) != len(second):
        raise ShapeMismatch(f"environments of sizes {len(first)} and {len(second)}")
    pairs = []
    for (x, s), (y, t) in zip(first, second):
        if s != t:
            raise ShapeMismatch(f"{x}:{s} cannot be swapped with {y}:{t}")
        pairs.append((x, y, s))
    return SwapPlan(tuple(pairs), guard).circuit()


# ---------------------------------------------------------------- elimination


_FRESH = re.compile(r"^(?:sh|anc)(\d+)$")


class _Fresh:
    def __init__(self, c: Circuit, env: Environment):
        used = set(env)
        for g in gates(c):
            used.update(g.ins)
            used.update(g.outs)
        used.update(_guards(c))
        nums = [int(m.group(1)) for x in used if (m := _FRESH.match(x))]
        self._count = itertools.count(max(nums, default=0) + 1)

    def shadow(self) -> str:
        return f"sh{next(self._count)}"

    def ancilla(self) -> str:
        return f"anc{next(self._count)}"


def _guards(c: Circuit):
    if isinstance(c, Ite):
        yield c.guard
        yield from _guards(c.then_c)
        yield from _guards(c.else_c)
    elif isinstance(c, Seq):
        for p in c.parts:
            yield from _guards(p)


def _labels(c: Circuit) -> set:
    out = set()
    for g in gates(c):
        out.update(g.ins)
        out.update(g.outs)
    return out


def eliminate(c: Circuit, env: Environment | None = None) -> Circuit:
    """An equivalent circuit without ``if``."""
    if env is None:
        env = infer_inputs(c)
    typecheck_circuit(c, env)
    fresh = _Fresh(c, env)
    out, _ = _elim(c, dict(env), fresh)
    return out


def _elim(c: Circuit, env: Environment, fresh: _Fresh) -> tuple[Circuit, Environment]:
    if isinstance(c, GateApp):
        return c, typecheck_circuit(c, env)
    if isinstance(c, Seq):
        parts = []
        for p in c.parts:
            q, env = _elim(p, env, fresh)
            parts.append(q)
        return seq(*parts) if parts else EMPTY, env
    inner = {k: v for k, v in env.items() if k != c.guard}
    d, out_d = _elim(c.then_c, inner, fresh)
    e, out_e = _elim(c.else_c, inner, fresh)
    if out_d != out_e:
        raise BranchEnvMismatch(f"ite {c.guard}: branches end in different environments")
    return _replace(c.guard, d, e, inner, out_d, fresh), out_d


def _replace(guard: str, d: Circuit, e: Circuit, env_in: Environment,
             env_out: Environment, fresh: _Fresh) -> Circuit:
    # wires neither branch reads pass around the whole construction
    read = set(infer_inputs(d)) | set(infer_inputs(e))
    gamma = {k: v for k, v in env_in.items() if k in read}
    delta = {k: v for k, v in env_out.items() if k in read or k not in env_in}
    if any(env_in[k] != env_out.get(k) for k in env_in if k not in read):
        raise IllTyped(f"ite {guard}: an untouched wire changes type")

    shadow = {x: fresh.shadow() for x in sorted(set(gamma) | set(delta) | _labels(d), key=label_key)}
    d_shadow = rename(d, shadow)
    init = []
    for x in sorted(gamma, key=label_key):
        s = shadow[x]
        if gamma[x] == QBIT:
            init += [gate("zero", [], [s]), gate("new", [s], [s])]
        else:
            init.append(gate("zero", [], [s]))
    kill = []
    for x in sorted(delta, key=label_key):
        s = shadow[x]
        if delta[x] == QBIT:
            kill += [gate("meas", [s], [s]), gate("discard", [s], [])]
        else:
            kill.append(gate("discard", [s], []))
    swap_in = tau_swap([(x, gamma[x]) for x in sorted(gamma, key=label_key)],
                       [(shadow[x], gamma[x]) for x in sorted(gamma, key=label_key)], guard)
    swap_out = tau_swap([(x, delta[x]) for x in sorted(delta, key=label_key)],
                        [(shadow[x], delta[x]) for x in sorted(delta, key=label_key)], guard)
    return seq(*init, swap_in, d_shadow, e, swap_out, gate("discard", [guard], []), *kill)
