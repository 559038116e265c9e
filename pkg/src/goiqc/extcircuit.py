"""Extended circuits: trees of circuits that branch on a bit wire.

``Branch(C, l, one, zero)`` runs ``C`` and then continues with ``one`` when the
bit ``l`` holds 1 and with ``zero`` otherwise.  An address picks one leaf by
fixing the branch labels along a path; a super-address also fixes the outcome
of every measurement (and every inner conditional) met on that path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Union

from .circuit import (
    EMPTY,
    BranchMark,
    Circuit,
    Environment,
    GateApp,
    Ite,
    Seq,
    _from_items,
    read_items,
    serialize_lines,
    typecheck_circuit,
    infer_inputs,
)
from .derivation import label_key
from .errors import AddressUndefined, BranchEnvMismatch, IllTyped, NonUniform, ParseError
from .syntax import BIT


def _akey(k) -> tuple:
    return (1, k, "") if isinstance(k, int) else (0, -1, label_key(k))


@dataclass(frozen=True)
class Address:
    """A finite partial map to {0, 1}, stored as a sorted association list.

    Keys are wire labels; super-addresses also use integer measurement indices.
    """

    items: tuple = ()

    @staticmethod
    def of(mapping=None, **kw) -> "Address":
        d = dict(mapping or {})
        d.update(kw)
        return Address(tuple(sorted(d.items(), key=lambda kv: _akey(kv[0]))))

    def as_dict(self) -> dict:
        return dict(self.items)

    def __contains__(self, key) -> bool:
        return any(k == key for k, _ in self.items)

    def get(self, key, default=None):
        for k, v in self.items:
            if k == key:
                return v
        return default

    def extend(self, key, value: int) -> "Address":
        d = self.as_dict()
        d[key] = value
        return Address.of(d)

    def keys(self) -> list:
        return [k for k, _ in self.items]

    def labels_only(self) -> "Address":
        return Address(tuple((k, v) for k, v in self.items if isinstance(k, str)))

    def __len__(self) -> int:
        return len(self.items)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{k}->{v}" for k, v in self.items) + "}"


EMPTY_ADDRESS = Address()
SuperAddress = Address


@dataclass(frozen=True)
class Leaf:
    circuit: Circuit


@dataclass(frozen=True)
class Branch:
    circuit: Circuit
    label: str
    one: "ExtendedCircuit"  # continuation when the label holds 1
    zero: "ExtendedCircuit"


ExtendedCircuit = Union[Leaf, Branch]


def at_address(e: ExtendedCircuit, g: Address) -> Circuit:
    """The leaf circuit that ``g`` selects."""
    used = 0
    while isinstance(e, Branch):
        b = g.get(e.label)
        if b is None:
            raise AddressUndefined(f"address {g} does not decide branch label {e.label}")
        used += 1
        e = e.one if b == 1 else e.zero
    if used != len(g):
        raise AddressUndefined(f"address {g} has labels outside the selected path")
    return e.circuit


def substitute_at(e: ExtendedCircuit, g: Address, c) -> ExtendedCircuit:
    """Replace the leaf at ``g`` by ``c`` (a circuit or a whole extended circuit)."""
    return _subst(e, g, c, 0)


def _subst(e, g, c, used):
    if isinstance(e, Leaf):
        if used != len(g):
            raise AddressUndefined(f"address {g} has labels outside the selected path")
        return c if isinstance(c, (Leaf, Branch)) else Leaf(c)
    b = g.get(e.label)
    if b is None:
        raise AddressUndefined(f"address {g} does not decide branch label {e.label}")
    if b == 1:
        return Branch(e.circuit, e.label, _subst(e.one, g, c, used + 1), e.zero)
    return Branch(e.circuit, e.label, e.one, _subst(e.zero, g, c, used + 1))


def leaves(e: ExtendedCircuit, prefix: Address = EMPTY_ADDRESS) -> Iterator[tuple[Address, Circuit]]:
    if isinstance(e, Leaf):
        yield prefix, e.circuit
    else:
        yield from leaves(e.one, prefix.extend(e.label, 1))
        yield from leaves(e.zero, prefix.extend(e.label, 0))


def addresses(e: ExtendedCircuit) -> list[Address]:
    return [g for g, _ in leaves(e)]


def branch_labels(e: ExtendedCircuit) -> list[str]:
    if isinstance(e, Leaf):
        return []
    return [e.label] + branch_labels(e.one) + branch_labels(e.zero)


def size_ext(e: ExtendedCircuit) -> int:
    from .circuit import size

    if isinstance(e, Leaf):
        return size(e.circuit)
    return size(e.circuit) + 1 + size_ext(e.one) + size_ext(e.zero)


# ---------------------------------------------------------------- super-addresses


def circuit_super_addresses(c: Circuit) -> list[dict]:
    """Every total choice of meas outcomes and conditional labels along one run of ``c``."""
    if isinstance(c, GateApp):
        if c.gate == "meas":
            return [{c.meas_index: 0}, {c.meas_index: 1}]
        return [{}]
    if isinstance(c, Seq):
        out = [{}]
        for p in c.parts:
            sub = circuit_super_addresses(p)
            if sub == [{}]:
                continue
            out = [{**a, **b} for a, b in itertools.product(out, sub)]
        return out
    return ([{c.guard: 1, **s} for s in circuit_super_addresses(c.then_c)]
            + [{c.guard: 0, **s} for s in circuit_super_addresses(c.else_c)])


def super_addresses(e: ExtendedCircuit) -> list[Address]:
    return [Address.of(d) for d in _ext_super(e)]


def _ext_super(e: ExtendedCircuit) -> list[dict]:
    head = circuit_super_addresses(e.circuit)
    if isinstance(e, Leaf):
        return head
    tails = ([{e.label: 1, **s} for s in _ext_super(e.one)]
             + [{e.label: 0, **s} for s in _ext_super(e.zero)])
    return [{**a, **b} for a, b in itertools.product(head, tails)]


# ---------------------------------------------------------------- typing and flattening


@dataclass(frozen=True)
class EnvLeaf:
    env: tuple  # sorted ((label, type), ...)


@dataclass(frozen=True)
class EnvNode:
    one: "ExtendedEnv"
    zero: "ExtendedEnv"


ExtendedEnv = Union[EnvLeaf, EnvNode]


def _freeze(env: Environment) -> tuple:
    return tuple(sorted(env.items(), key=lambda kv: label_key(kv[0])))


def ext_typecheck(e: ExtendedCircuit, env: Environment) -> ExtendedEnv:
    out = typecheck_circuit(e.circuit, env)
    if isinstance(e, Leaf):
        return EnvLeaf(_freeze(out))
    if out.get(e.label) != BIT:
        raise IllTyped(f"branch label {e.label!r} is not a live bit")
    rest = {k: v for k, v in out.items() if k != e.label}
    return EnvNode(ext_typecheck(e.one, rest), ext_typecheck(e.zero, rest))


def env_leaves(t: ExtendedEnv) -> list[tuple]:
    if isinstance(t, EnvLeaf):
        return [t.env]
    return env_leaves(t.one) + env_leaves(t.zero)


def is_uniform(t: ExtendedEnv) -> bool:
    return len(set(env_leaves(t))) == 1


def _flatten(e: ExtendedCircuit) -> Circuit:
    from .circuit import seq

    if isinstance(e, Leaf):
        return e.circuit
    return seq(e.circuit, Ite(e.label, _flatten(e.one), _flatten(e.zero)))


def tau(e: ExtendedCircuit, env: Environment | None = None) -> Circuit:
    """Flatten ``e`` into a plain circuit, turning every branch into an ``if``."""
    flat = _flatten(e)
    if env is None:
        env = infer_inputs(flat)
    try:
        shape = ext_typecheck(e, env)
    except BranchEnvMismatch as exc:
        raise NonUniform(str(exc)) from exc
    if not is_uniform(shape):
        raise NonUniform("leaves of the extended circuit end in different environments")
    return flat


# ---------------------------------------------------------------- text format


def serialize_ext_lines(e: ExtendedCircuit, indent: int = 0) -> list[str]:
    out = serialize_lines(e.circuit, indent) if not (
        isinstance(e.circuit, Seq) and not e.circuit.parts) else []
    if isinstance(e, Branch):
        pad = "  " * indent
        out.append(f"{pad}branch {e.label} {{")
        out.extend(serialize_ext_lines(e.one, indent + 1))
        out.append(f"{pad}}} {{")
        out.extend(serialize_ext_lines(e.zero, indent + 1))
        out.append(f"{pad}}}")
    return out


def serialize_ext(e: ExtendedCircuit) -> str:
    lines = serialize_ext_lines(e)
    return "\n".join(lines) + ("\n" if lines else "")


def parse_ext(text: str) -> ExtendedCircuit:
    parts, _ = read_items(text)
    return _ext_from_items(parts)


def _ext_from_items(parts: list) -> ExtendedCircuit:
    marks = [k for k, p in enumerate(parts) if isinstance(p, BranchMark)]
    if not marks:
        return Leaf(_from_items(parts))
    k = marks[0]
    if k != len(parts) - 1:
        raise ParseError("a branch block must end its enclosing block", 0, 0)
    m = parts[k]
    head = _from_items(parts[:k]) if k else EMPTY
    return Branch(head, m.label, _ext_from_items(m.one_items), _ext_from_items(m.zero_items))


def leaf_of(items_: Iterable) -> Leaf:
    return Leaf(_from_items(list(items_)))
