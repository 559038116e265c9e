"""Completely positive map semantics of circuits.

An object is a tuple of matrix sizes; a state over ``(n1, ..., nk)`` is a tuple
of ``k`` square complex blocks.  An environment of ``b`` bits and ``q`` qubits
is interpreted as ``2**b`` blocks of size ``2**q``: blocks are indexed by the
bit values (earlier labels more significant) and matrices follow the qubit
labels (earlier labels more significant).

Within a bit, the first slot holds value 1 and the second value 0, so that
``one`` is ``x -> (x, 0)`` and ``new`` sends ``(x, 0)`` to ``x |1><1|``.
Use :func:`block_for` to address blocks by bit values instead of slots.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .circuit import GATES, Circuit, Environment, GateApp, GateDef, Seq, typecheck_circuit
from .derivation import label_key
from .errors import IllTyped, NonUniformDistribution, ObjectMismatch
from .syntax import Bit, Qbit, Tensor, TypeExpr, Unit

TOL = 1e-9
MAX_PROBE_QUBITS = 6
MAX_PROBE_BITS = 4


# ---------------------------------------------------------------- objects


def tensor(a: tuple, b: tuple) -> tuple:
    """Lexicographic products of all pairs of entries."""
    return tuple(x * y for x in a for y in b)


UNIT_OBJECT = (1,)


def interp_type(t: TypeExpr) -> tuple:
    if isinstance(t, Bit):
        return (1, 1)
    if isinstance(t, Qbit):
        return (2,)
    if isinstance(t, Unit):
        return UNIT_OBJECT
    if isinstance(t, Tensor):
        return tensor(interp_type(t.left), interp_type(t.right))
    raise IllTyped(f"{t} has no object: function types are not Boolean")


def sorted_labels(env: Environment) -> list[str]:
    return sorted(env, key=label_key)


def interp_env(env: Environment) -> tuple:
    obj = UNIT_OBJECT
    for lab in sorted_labels(env):
        obj = tensor(obj, interp_type(env[lab]))
    return obj


def _split_env(env: Environment) -> tuple[tuple, tuple]:
    labs = sorted_labels(env)
    bits = tuple(x for x in labs if isinstance(env[x], Bit))
    qbits = tuple(x for x in labs if isinstance(env[x], Qbit))
    return bits, qbits


# ---------------------------------------------------------------- states


@dataclass(frozen=True, eq=False)
class CpmState:
    obj: tuple
    blocks: tuple

    @staticmethod
    def zeros(obj: tuple) -> "CpmState":
        return CpmState(tuple(obj), tuple(np.zeros((n, n), complex) for n in obj))

    @staticmethod
    def from_array(arr: np.ndarray) -> "CpmState":
        arr = np.asarray(arr, dtype=complex)
        return CpmState((arr.shape[1],) * arr.shape[0], tuple(arr))

    def stacked(self) -> np.ndarray:
        if len(set(self.obj)) > 1:
            raise ObjectMismatch(f"object {self.obj} is not uniform")
        return np.stack([np.asarray(b, complex) for b in self.blocks])

    def __add__(self, other: "CpmState") -> "CpmState":
        if self.obj != other.obj:
            raise ObjectMismatch(f"{self.obj} vs {other.obj}")
        return CpmState(self.obj, tuple(a + b for a, b in zip(self.blocks, other.blocks)))

    def __rmul__(self, scalar) -> "CpmState":
        return CpmState(self.obj, tuple(scalar * b for b in self.blocks))

    def trace(self) -> complex:
        return sum(np.trace(b) for b in self.blocks)

    def distance(self, other: "CpmState") -> float:
        """Frobenius norm of the difference."""
        if self.obj != other.obj:
            raise ObjectMismatch(f"{self.obj} vs {other.obj}")
        return float(np.sqrt(sum(np.linalg.norm(a - b) ** 2
                                 for a, b in zip(self.blocks, other.blocks))))

    def trace_distance(self, other: "CpmState") -> float:
        if self.obj != other.obj:
            raise ObjectMismatch(f"{self.obj} vs {other.obj}")
        total = 0.0
        for a, b in zip(self.blocks, other.blocks):
            d = a - b
            total += np.abs(np.linalg.eigvalsh((d + d.conj().T) / 2)).sum()
        return float(total / 2)

    def to_json(self) -> list:
        return [[[float(z.real), float(z.imag)] for z in np.asarray(b).ravel()]
                for b in self.blocks]

    @staticmethod
    def from_json(obj: tuple, data: list) -> "CpmState":
        blocks = []
        for n, flat in zip(obj, data):
            if len(flat) != n * n:
                raise ObjectMismatch(f"block of {len(flat)} entries for size {n}")
            blocks.append(np.array([complex(re, im) for re, im in flat]).reshape(n, n))
        if len(blocks) != len(obj):
            raise ObjectMismatch(f"{len(data)} blocks for object {obj}")
        return CpmState(tuple(obj), tuple(blocks))


def block_index(env: Environment, values: dict) -> int:
    """Position of the block where each bit label holds ``values[label]``."""
    bits, _ = _split_env(env)
    idx = 0
    for b in bits:
        idx = 2 * idx + (1 - int(values[b]))
    return idx


def block_for(state: CpmState, env: Environment, values: dict) -> np.ndarray:
    return state.blocks[block_index(env, values)]


def density_state(env: Environment, rho_by_bits: dict) -> CpmState:
    """State with the given matrices on the listed bit assignments and zeros elsewhere.

    Keys of ``rho_by_bits`` are tuples of bit values in sorted label order.
    """
    obj = interp_env(env)
    blocks = [np.zeros((obj[0], obj[0]), complex) for _ in obj]
    bits, _ = _split_env(env)
    for vals, rho in rho_by_bits.items():
        blocks[block_index(env, dict(zip(bits, vals)))] = np.asarray(rho, complex)
    return CpmState(obj, tuple(blocks))


# ---------------------------------------------------------------- labeled tensors
#
# Internally a batch of states over an environment is one array with axes
# [batch] + [one per bit, indexed by value] + [qubit rows] + [qubit columns].


@dataclass
class _LT:
    bits: list
    qbits: list
    data: np.ndarray

    def bax(self, b: str) -> int:
        return 1 + self.bits.index(b)

    def row(self, q: str) -> int:
        return 1 + len(self.bits) + self.qbits.index(q)

    def col(self, q: str) -> int:
        return 1 + len(self.bits) + len(self.qbits) + self.qbits.index(q)

    def canonical(self) -> "_LT":
        bits = sorted(self.bits, key=label_key)
        qbits = sorted(self.qbits, key=label_key)
        nb, nq = len(bits), len(qbits)
        perm = [0]
        perm += [1 + self.bits.index(b) for b in bits]
        perm += [1 + nb + self.qbits.index(q) for q in qbits]
        perm += [1 + nb + nq + self.qbits.index(q) for q in qbits]
        return _LT(bits, qbits, np.transpose(self.data, perm))


def _from_blocks(env: Environment, arr: np.ndarray) -> _LT:
    bits, qbits = _split_env(env)
    nb, nq = len(bits), len(qbits)
    data = arr.reshape((arr.shape[0],) + (2,) * (nb + 2 * nq))
    if nb:
        data = np.flip(data, axis=tuple(range(1, 1 + nb)))
    return _LT(list(bits), list(qbits), data)


def _to_blocks(lt: _LT) -> np.ndarray:
    lt = lt.canonical()
    nb, nq = len(lt.bits), len(lt.qbits)
    data = lt.data
    if nb:
        data = np.flip(data, axis=tuple(range(1, 1 + nb)))
    return np.ascontiguousarray(data).reshape(data.shape[0], 2 ** nb, 2 ** nq, 2 ** nq)


def _unitary(lt: _LT, u: np.ndarray, ins: Sequence[str], outs: Sequence[str]) -> _LT:
    k = len(ins)
    ut = u.reshape((2,) * (2 * k))
    rows = [lt.row(q) for q in ins]
    data = np.tensordot(ut, lt.data, axes=(list(range(k, 2 * k)), rows))
    data = np.moveaxis(data, list(range(k)), rows)
    cols = [lt.col(q) for q in ins]
    data = np.tensordot(ut.conj(), data, axes=(list(range(k, 2 * k)), cols))
    data = np.moveaxis(data, list(range(k)), cols)
    qbits = list(lt.qbits)
    for a, b in zip(ins, outs):
        qbits[qbits.index(a)] = b
    return _LT(list(lt.bits), qbits, data)


def _new(lt: _LT, b: str, q: str) -> _LT:
    ax = lt.bax(b)
    d0 = np.take(lt.data, 0, axis=ax)
    d1 = np.take(lt.data, 1, axis=ax)
    bits = [x for x in lt.bits if x != b]
    rowpos = 1 + len(bits) + len(lt.qbits)
    d0 = np.expand_dims(np.expand_dims(d0, rowpos), -1)
    d1 = np.expand_dims(np.expand_dims(d1, rowpos), -1)
    z = np.zeros_like(d0)
    data = np.concatenate([np.concatenate([d0, z], axis=rowpos),
                           np.concatenate([z, d1], axis=rowpos)], axis=-1)
    return _LT(bits, list(lt.qbits) + [q], data)


def _meas(lt: _LT, q: str, b: str, keep: Optional[int] = None) -> _LT:
    r, c = lt.row(q), lt.col(q)
    parts = []
    for v in (0, 1):
        d = np.take(np.take(lt.data, v, axis=c), v, axis=r)
        if keep is not None and v != keep:
            d = np.zeros_like(d)
        parts.append(d)
    bits = list(lt.bits)
    data = np.stack(parts, axis=1 + len(bits))
    return _LT(bits + [b], [x for x in lt.qbits if x != q], data)


def _const(lt: _LT, b: str, value: int) -> _LT:
    z = np.zeros_like(lt.data)
    parts = [lt.data, z] if value == 0 else [z, lt.data]
    data = np.stack(parts, axis=1 + len(lt.bits))
    return _LT(list(lt.bits) + [b], list(lt.qbits), data)


def _discard(lt: _LT, b: str) -> _LT:
    data = lt.data.sum(axis=lt.bax(b))
    return _LT([x for x in lt.bits if x != b], list(lt.qbits), data)


def _rename(lt: _LT, a: str, b: str) -> _LT:
    return _LT([b if x == a else x for x in lt.bits], [b if x == a else x for x in lt.qbits], lt.data)


def _apply_gate(lt: _LT, g: GateApp, keep: Optional[int] = None) -> _LT:
    d: GateDef = GATES[g.gate]
    if d.kind == "unitary":
        return _unitary(lt, d.matrix, g.ins, g.outs)
    if d.kind == "new":
        return _new(lt, g.ins[0], g.outs[0])
    if d.kind == "meas":
        return _meas(lt, g.ins[0], g.outs[0], keep)
    if d.kind == "zero":
        return _const(lt, g.outs[0], 0)
    if d.kind == "one":
        return _const(lt, g.outs[0], 1)
    if d.kind == "discard":
        return _discard(lt, g.ins[0])
    if d.kind == "id":
        return _rename(lt, g.ins[0], g.outs[0])
    raise IllTyped(f"gate {g.gate} has no interpretation")


def _simulate(c: Circuit, lt: _LT, s: Optional[dict] = None) -> _LT:
    """Run ``c``; with a super-address ``s``, follow only the selected slice."""
    if isinstance(c, GateApp):
        keep = None
        if s is not None and c.gate == "meas" and c.meas_index is not None:
            keep = s[c.meas_index]
        return _apply_gate(lt, c, keep)
    if isinstance(c, Seq):
        for p in c.parts:
            lt = _simulate(p, lt, s)
        return lt
    ax = lt.bax(c.guard)
    bits = [x for x in lt.bits if x != c.guard]
    one = _LT(bits, list(lt.qbits), np.take(lt.data, 1, axis=ax))
    zero = _LT(list(bits), list(lt.qbits), np.take(lt.data, 0, axis=ax))
    if s is not None:
        chosen = (c.then_c, one) if s[c.guard] == 1 else (c.else_c, zero)
        return _simulate(chosen[0], chosen[1], s)
    r1 = _simulate(c.then_c, one, s).canonical()
    r0 = _simulate(c.else_c, zero, s).canonical()
    return _LT(r1.bits, r1.qbits, r1.data + r0.data)


# ---------------------------------------------------------------- maps


@dataclass(frozen=True, eq=False)
class CpmMap:
    """A linear map between uniform objects, acting on stacked batches of states.

    ``action`` takes an array of shape (batch, k, n, n) and returns one of shape
    (batch, k', n', n').
    """

    source: tuple
    target: tuple
    action: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    def apply_batch(self, arr: np.ndarray) -> np.ndarray:
        return self.action(np.asarray(arr, dtype=complex))

    def __call__(self, state: CpmState) -> CpmState:
        if tuple(state.obj) != tuple(self.source):
            raise ObjectMismatch(f"map expects {self.source}, got {state.obj}")
        out = self.apply_batch(state.stacked()[None])[0]
        return CpmState(tuple(self.target), tuple(out))

    def then(self, other: "CpmMap") -> "CpmMap":
        if self.target != other.source:
            raise ObjectMismatch(f"cannot compose {self.target} with {other.source}")
        return CpmMap(self.source, other.target, lambda a: other.action(self.action(a)))

    def __add__(self, other: "CpmMap") -> "CpmMap":
        if (self.source, self.target) != (other.source, other.target):
            raise ObjectMismatch("maps between different objects")
        return CpmMap(self.source, self.target, lambda a: self.action(a) + other.action(a))


def zero_map(source: tuple, target: tuple) -> CpmMap:
    k, n = len(target), target[0]
    return CpmMap(source, target, lambda a: np.zeros((a.shape[0], k, n, n), complex))


def _circuit_map(c: Circuit, env: Environment, s: Optional[dict]) -> CpmMap:
    try:
        out_env = typecheck_circuit(c, env)
    except Exception as exc:
        raise IllTyped(str(exc)) from exc
    env = dict(env)

    def action(arr):
        return _to_blocks(_simulate(c, _from_blocks(env, arr), s))

    return CpmMap(interp_env(env), interp_env(out_env), action)


def interp_circuit(c: Circuit, env: Environment) -> CpmMap:
    return _circuit_map(c, env, None)


def interp_gate(g: GateDef) -> CpmMap:
    """The gate as a map from its inputs (in order) to its outputs (in order)."""
    ins = [f"i{k}" for k in range(len(g.inputs))]
    outs = [f"o{k}" for k in range(len(g.outputs))]
    env = dict(zip(ins, g.inputs))
    return interp_circuit(GateApp(g.name, tuple(ins), tuple(outs)), env)


def is_compatible(c: Circuit, s: dict) -> bool:
    """Whether ``s`` is one of the super-addresses of ``c``."""
    used: set = set()
    if not _walk_slice(c, s, used):
        return False
    return used == set(s)


def _walk_slice(c: Circuit, s: dict, used: set) -> bool:
    if isinstance(c, GateApp):
        if c.gate == "meas":
            if c.meas_index not in s:
                return False
            used.add(c.meas_index)
        return True
    if isinstance(c, Seq):
        return all(_walk_slice(p, s, used) for p in c.parts)
    if c.guard not in s:
        return False
    used.add(c.guard)
    return _walk_slice(c.then_c if s[c.guard] == 1 else c.else_c, s, used)


def _as_dict(s) -> dict:
    return s.as_dict() if hasattr(s, "as_dict") else dict(s)


def slice_interp(c: Circuit, s, env: Environment) -> CpmMap:
    """The slice of ``c`` selected by super-address ``s``; the zero map if incompatible."""
    s = _as_dict(s)
    m = _circuit_map(c, env, s)
    if not is_compatible(c, s):
        return zero_map(m.source, m.target)
    return m


def ext_slice_interp(e, s, env: Environment) -> CpmMap:
    """Slice of an extended circuit, computed by walking its tree directly."""
    from .extcircuit import ext_typecheck, env_leaves, Leaf

    s = _as_dict(s)
    shape = ext_typecheck(e, env)
    out_env = dict(env_leaves(shape)[0])
    source, target = interp_env(env), interp_env(out_env)

    used: set = set()
    node = e
    ok = True
    while True:
        ok = ok and _walk_slice(node.circuit, s, used)
        if isinstance(node, Leaf) or not ok:
            break
        if node.label not in s:
            ok = False
            break
        used.add(node.label)
        node = node.one if s[node.label] == 1 else node.zero
    if not ok or used != set(s):
        return zero_map(source, target)

    def action(arr):
        lt = _from_blocks(env, arr)
        node = e
        while True:
            lt = _simulate(node.circuit, lt, s)
            if isinstance(node, Leaf):
                return _to_blocks(lt)
            ax = lt.bax(node.label)
            b = s[node.label]
            lt = _LT([x for x in lt.bits if x != node.label], list(lt.qbits),
                     np.take(lt.data, b, axis=ax))
            node = node.one if b == 1 else node.zero

    return CpmMap(source, target, action)


def interp_ext(e, env: Environment) -> CpmMap:
    """Full interpretation of a uniform extended circuit, summing both sides of each branch."""
    from .extcircuit import ext_typecheck, env_leaves, Leaf

    shape = ext_typecheck(e, env)
    out_env = dict(env_leaves(shape)[0])

    def run(node, lt):
        lt = _simulate(node.circuit, lt)
        if isinstance(node, Leaf):
            return lt.canonical()
        ax = lt.bax(node.label)
        bits = [x for x in lt.bits if x != node.label]
        r1 = run(node.one, _LT(bits, list(lt.qbits), np.take(lt.data, 1, axis=ax)))
        r0 = run(node.zero, _LT(list(bits), list(lt.qbits), np.take(lt.data, 0, axis=ax)))
        return _LT(r1.bits, r1.qbits, r1.data + r0.data)

    return CpmMap(interp_env(env), interp_env(out_env),
                  lambda arr: _to_blocks(run(e, _from_blocks(env, arr))))


# ---------------------------------------------------------------- equality oracle


def map_equal(f: CpmMap, g: CpmMap, tol: float = TOL) -> bool:
    """Compare two maps on every matrix unit of every block of the source."""
    return max_map_difference(f, g) <= tol


def max_map_difference(f: CpmMap, g: CpmMap) -> float:
    if tuple(f.source) != tuple(g.source) or tuple(f.target) != tuple(g.target):
        raise ObjectMismatch(f"{f.source}->{f.target} vs {g.source}->{g.target}")
    k, n = len(f.source), f.source[0]
    if len(set(f.source)) > 1:
        raise ObjectMismatch(f"source {f.source} is not uniform")
    if n > 2 ** MAX_PROBE_QUBITS or k > 2 ** MAX_PROBE_BITS:
        raise ObjectMismatch(
            f"probing {k} blocks of size {n} exceeds {MAX_PROBE_QUBITS} qubits + {MAX_PROBE_BITS} bits")
    total = k * n * n
    # intermediate wires can be much wider than the source, so keep batches small
    chunk = min(total, 16)
    worst = 0.0
    probes = list(itertools.product(range(k), range(n), range(n)))
    for start in range(0, total, chunk):
        sel = probes[start:start + chunk]
        arr = np.zeros((len(sel), k, n, n), complex)
        for t, (i, p, q) in enumerate(sel):
            arr[t, i, p, q] = 1.0
        diff = f.apply_batch(arr) - g.apply_batch(arr)
        norms = np.sqrt((np.abs(diff) ** 2).reshape(len(sel), -1).sum(axis=1))
        worst = max(worst, float(norms.max()))
    return worst


# ---------------------------------------------------------------- registers


@dataclass(frozen=True, eq=False)
class QCRegister:
    """Labels in order, a pure state over the qubit labels, and values of the bit labels."""

    L: tuple  # ((label, BIT | QBIT), ...)
    Q: np.ndarray
    v: tuple  # ((bit label, 0 | 1), ...)

    @staticmethod
    def make(L, Q, v=None) -> "QCRegister":
        v = dict(v or {})
        return QCRegister(tuple(L), np.asarray(Q, complex).ravel(),
                          tuple(sorted(v.items(), key=lambda kv: label_key(kv[0]))))

    @property
    def env(self) -> Environment:
        return dict(self.L)

    @property
    def qlabels(self) -> list[str]:
        return [x for x, t in self.L if isinstance(t, Qbit)]

    def canonical(self) -> "QCRegister":
        """Same register with labels sorted and the qubit state permuted to match."""
        q = self.qlabels
        order = sorted(q, key=label_key)
        psi = self.Q.reshape((2,) * len(q)) if q else self.Q.reshape(())
        if q:
            psi = np.transpose(psi, [q.index(x) for x in order])
        L = tuple(sorted(self.L, key=lambda kv: label_key(kv[0])))
        return QCRegister(L, np.ascontiguousarray(psi).ravel(), self.v)


def mix(r: QCRegister) -> CpmState:
    r = r.canonical()
    env = r.env
    rho = np.outer(r.Q, r.Q.conj())
    bits, _ = _split_env(env)
    vals = dict(r.v)
    return density_state(env, {tuple(vals[b] for b in bits): rho})


def mix_dist(dist) -> CpmState:
    """Weighted sum of register mixes; every register must carry the same labels."""
    dist = list(dist)
    if not dist:
        raise NonUniformDistribution("empty distribution")
    envs = {tuple(sorted(r.L, key=lambda kv: label_key(kv[0]))) for r, _ in dist}
    if len(envs) != 1:
        raise NonUniformDistribution("registers in the distribution carry different labels")
    out = None
    for r, w in dist:
        m = w * mix(r)
        out = m if out is None else out + m
    return out


__all__ = [
    "CpmMap", "CpmState", "QCRegister", "block_for", "block_index", "density_state",
    "ext_slice_interp", "interp_circuit", "interp_env", "interp_ext", "interp_gate",
    "interp_type", "is_compatible", "map_equal", "max_map_difference", "mix", "mix_dist",
    "slice_interp", "tensor", "zero_map",
]
