"""Labeled quantum circuits with classical conditionals.

A circuit is a gate application, a sequence of circuits, or ``if l {C} else {D}``
on a bit wire ``l``.  Wires are named by labels; anything a gate does not
touch passes through implicitly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

from .errors import (
    BranchEnvMismatch,
    IllTyped,
    LabelClash,
    ParseError,
    SignatureArityMismatch,
    UnboundLabel,
)
from .derivation import label_key
from .syntax import BIT, QBIT, OP_SIGNATURES


# ---------------------------------------------------------------- gate registry


@dataclass(frozen=True, eq=False)
class GateDef:
    name: str
    inputs: tuple
    outputs: tuple
    kind: str  # unitary | new | meas | zero | one | discard | id
    matrix: Optional[np.ndarray] = None


_SQ2 = 1 / np.sqrt(2)
_MATRICES = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "S": np.diag([1, 1j]).astype(complex),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "CNOT": np.eye(4, dtype=complex)[[0, 1, 3, 2]],
    # |ijk> -> |jik> when the last (control) wire k is 1
    "CSWAP": np.eye(8, dtype=complex)[[0, 1, 2, 5, 4, 3, 6, 7]],
    "TOFFOLI": np.eye(8, dtype=complex)[[0, 1, 2, 3, 4, 5, 7, 6]],
}


def _registry() -> dict[str, GateDef]:
    out = {}
    for name, sig in OP_SIGNATURES.items():
        kind = "unitary" if name in _MATRICES else name
        out[name] = GateDef(name, sig.inputs, sig.outputs, kind, _MATRICES.get(name))
    # identity wires, used when a wire is renamed without a gate to rename
    out["id"] = GateDef("id", (QBIT,), (QBIT,), "id")
    out["idb"] = GateDef("idb", (BIT,), (BIT,), "id")
    return out


GATES: dict[str, GateDef] = _registry()


# ---------------------------------------------------------------- circuits


@dataclass(frozen=True)
class GateApp:
    gate: str
    ins: tuple
    outs: tuple
    meas_index: Optional[int] = None


@dataclass(frozen=True)
class Seq:
    """Sequential composition of any number of parts; ``Seq(())`` is the identity."""

    parts: tuple = ()


@dataclass(frozen=True)
class Ite:
    guard: str
    then_c: "Circuit"
    else_c: "Circuit"


Circuit = Union[GateApp, Seq, Ite]

EMPTY = Seq(())


def seq(*parts: Circuit) -> Circuit:
    """Flattening sequential composition."""
    flat: list = []
    for p in parts:
        if isinstance(p, Seq):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return Seq(tuple(flat))


def items(c: Circuit) -> tuple:
    """Top-level statements of ``c``."""
    return c.parts if isinstance(c, Seq) else (c,)


def gate(name: str, ins=(), outs=(), meas_index=None) -> GateApp:
    return GateApp(name, tuple(ins), tuple(outs), meas_index)


def size(c: Circuit) -> int:
    if isinstance(c, GateApp):
        return 1
    if isinstance(c, Seq):
        return sum(size(p) for p in c.parts)
    return 1 + size(c.then_c) + size(c.else_c)


def gates(c: Circuit) -> Iterator[GateApp]:
    if isinstance(c, GateApp):
        yield c
    elif isinstance(c, Seq):
        for p in c.parts:
            yield from gates(p)
    else:
        yield from gates(c.then_c)
        yield from gates(c.else_c)


def has_ite(c: Circuit) -> bool:
    if isinstance(c, Ite):
        return True
    return isinstance(c, Seq) and any(has_ite(p) for p in c.parts)


def meas_indices(c: Circuit) -> list[int]:
    return [g.meas_index for g in gates(c) if g.gate == "meas"]


def rename(c: Circuit, mapping: dict) -> Circuit:
    """Rename labels everywhere in ``c`` (labels absent from ``mapping`` are kept)."""
    if isinstance(c, GateApp):
        return GateApp(c.gate, tuple(mapping.get(x, x) for x in c.ins),
                       tuple(mapping.get(x, x) for x in c.outs), c.meas_index)
    if isinstance(c, Seq):
        return Seq(tuple(rename(p, mapping) for p in c.parts))
    return Ite(mapping.get(c.guard, c.guard), rename(c.then_c, mapping), rename(c.else_c, mapping))


# ---------------------------------------------------------------- typing

Environment = dict  # label -> BIT | QBIT


def typecheck_circuit(c: Circuit, env: Environment) -> Environment:
    """Return the output environment of ``c`` run on ``env``; untouched wires pass through."""
    env = dict(env)
    if isinstance(c, GateApp):
        g = GATES.get(c.gate)
        if g is None:
            raise IllTyped(f"unknown gate {c.gate!r}")
        if len(c.ins) != len(g.inputs) or len(c.outs) != len(g.outputs):
            raise SignatureArityMismatch(
                f"{c.gate} takes {len(g.inputs)} -> {len(g.outputs)} wires, "
                f"got {len(c.ins)} -> {len(c.outs)}")
        if len(set(c.ins)) != len(c.ins) or len(set(c.outs)) != len(c.outs):
            raise LabelClash(f"repeated label in {c.gate} {c.ins} -> {c.outs}")
        for lab, ty in zip(c.ins, g.inputs):
            if lab not in env:
                raise UnboundLabel(f"{c.gate} consumes unbound label {lab!r}")
            if env[lab] != ty:
                raise IllTyped(f"{c.gate} expects {ty} on {lab!r}, found {env[lab]}")
            del env[lab]
        for lab, ty in zip(c.outs, g.outputs):
            if lab in env:
                raise LabelClash(f"{c.gate} produces {lab!r}, which is already live")
            env[lab] = ty
        return env
    if isinstance(c, Seq):
        for p in c.parts:
            env = typecheck_circuit(p, env)
        return env
    if c.guard not in env:
        raise UnboundLabel(f"ite guard {c.guard!r} is unbound")
    if env[c.guard] != BIT:
        raise IllTyped(f"ite guard {c.guard!r} is not a bit")
    del env[c.guard]
    left = typecheck_circuit(c.then_c, env)
    right = typecheck_circuit(c.else_c, env)
    if left != right:
        raise BranchEnvMismatch(
            f"ite {c.guard}: branches end in {_show_env(left)} and {_show_env(right)}")
    return left


def _show_env(env: Environment) -> str:
    return "{" + ", ".join(f"{x}:{env[x]}" for x in sorted(env, key=label_key)) + "}"


def infer_inputs(c: Circuit) -> Environment:
    """The smallest input environment on which ``c`` typechecks."""
    needed: dict = {}
    _infer_inputs(c, set(), needed)
    return needed


def _infer_inputs(c: Circuit, live: set, needed: dict) -> set:
    if isinstance(c, GateApp):
        g = GATES[c.gate]
        for lab, ty in zip(c.ins, g.inputs):
            if lab in live:
                live = live - {lab}
            elif lab not in needed:
                needed[lab] = ty
        return live | set(c.outs)
    if isinstance(c, Seq):
        for p in c.parts:
            live = _infer_inputs(p, live, needed)
        return live
    if c.guard in live:
        live = live - {c.guard}
    elif c.guard not in needed:
        needed[c.guard] = BIT
    # wires the branches consume must exist beforehand
    left = _infer_inputs(c.then_c, set(live), needed)
    right = _infer_inputs(c.else_c, set(live), needed)
    return left | right


# ---------------------------------------------------------------- text format


def _side(labels: tuple) -> str:
    return ",".join(labels) if labels else "()"


def serialize_lines(c: Circuit, indent: int = 0) -> list[str]:
    pad = "  " * indent
    out = []
    for it in items(c):
        if isinstance(it, GateApp):
            if it.meas_index is not None:
                out.append(f"{pad}# meas-index {it.meas_index}")
            out.append(f"{pad}{it.gate} {_side(it.ins)} -> {_side(it.outs)}")
        elif isinstance(it, Ite):
            out.append(f"{pad}if {it.guard} {{")
            out.extend(serialize_lines(it.then_c, indent + 1))
            out.append(f"{pad}}} else {{")
            out.extend(serialize_lines(it.else_c, indent + 1))
            out.append(f"{pad}}}")
        else:
            out.extend(serialize_lines(it, indent))
    return out


def normalize(c: Circuit) -> Circuit:
    """Canonical form: nested sequences flattened, singleton sequences unwrapped."""
    if isinstance(c, GateApp):
        return c
    if isinstance(c, Ite):
        return Ite(c.guard, normalize(c.then_c), normalize(c.else_c))
    return seq(*(normalize(p) for p in c.parts))


def serialize(c: Circuit, inputs: Optional[Environment] = None) -> str:
    lines = []
    if inputs:
        decl = ", ".join(f"{x}:{inputs[x]}" for x in sorted(inputs, key=label_key))
        lines.append(f"# inputs {decl}")
    lines.extend(serialize_lines(c))
    return "\n".join(lines) + ("\n" if lines else "")


_GATE_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s+(.*?)\s*->\s*(.*?)$")
_LABEL = re.compile(r"^[A-Za-z_][A-Za-z0-9_']*$")


class _LineReader:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.i = 0
        self.inputs: Optional[Environment] = None

    def error(self, msg: str, col: int = 1):
        return ParseError(msg, self.i + 1, col)

    def labels(self, text: str) -> tuple:
        text = text.strip()
        if text in ("()", ""):
            return ()
        labs = tuple(x.strip() for x in text.split(","))
        for lab in labs:
            if not _LABEL.match(lab):
                raise self.error(f"bad label {lab!r}")
        return labs

    def block(self, closers: tuple) -> tuple[list, str]:
        """Read statements until a line in ``closers``; returns (items, closer)."""
        out: list = []
        pending_meas = None
        while self.i < len(self.lines):
            raw = self.lines[self.i]
            line = raw.strip()
            col = len(raw) - len(raw.lstrip()) + 1
            if not line:
                self.i += 1
                continue
            if line in closers:
                return out, line
            self.i += 1
            if line.startswith("#"):
                m = re.match(r"#\s*meas-index\s+(\d+)\s*$", line)
                if m:
                    pending_meas = int(m.group(1))
                    continue
                m = re.match(r"#\s*inputs\s*(.*)$", line)
                if m and self.inputs is None:
                    self.inputs = {}
                    for part in filter(None, (p.strip() for p in m.group(1).split(","))):
                        lab, _, ty = part.partition(":")
                        if ty.strip() not in ("bit", "qbit"):
                            raise self.error(f"bad input declaration {part!r}", col)
                        self.inputs[lab.strip()] = BIT if ty.strip() == "bit" else QBIT
                continue
            m = re.match(r"^branch\s+(\S+)\s*\{$", line)
            if m:
                one_items, closer = self.block(("} {",))
                if closer != "} {":
                    raise self.error("expected '} {'", col)
                self.i += 1
                zero_items, closer = self.block(("}",))
                if closer != "}":
                    raise self.error("expected '}'", col)
                self.i += 1
                out.append(BranchMark(m.group(1), one_items, zero_items))
                continue
            m = re.match(r"^if\s+(\S+)\s*\{$", line)
            if m:
                guard = m.group(1)
                then_items, closer = self.block(("} else {",))
                if closer != "} else {":
                    raise self.error("expected '} else {'", col)
                self.i += 1
                else_items, closer = self.block(("}",))
                if closer != "}":
                    raise self.error("expected '}'", col)
                self.i += 1
                out.append(Ite(guard, _from_items(then_items), _from_items(else_items)))
                continue
            m = _GATE_LINE.match(line)
            if not m:
                raise self.error(f"cannot parse {line!r}", col)
            name, ins, outs = m.groups()
            if name not in GATES:
                raise self.error(f"unknown gate {name!r}", col)
            idx = None
            if name == "meas":
                idx, pending_meas = pending_meas, None
            out.append(GateApp(name, self.labels(ins), self.labels(outs), idx))
        return out, ""


@dataclass
class BranchMark:
    """A ``branch`` block met while reading an extended circuit."""

    label: str
    one_items: list
    zero_items: list


def _from_items(parts: list) -> Circuit:
    for p in parts:
        if isinstance(p, BranchMark):
            raise ParseError("branch blocks are only allowed in extended circuits", 0, 0)
    if len(parts) == 1:
        return parts[0]
    return Seq(tuple(parts))


def read_items(text: str) -> tuple[list, Optional[Environment]]:
    r = _LineReader(text)
    parts, closer = r.block(())
    if closer:
        raise r.error(f"unexpected {closer!r}")
    return parts, r.inputs


def parse_circuit_with_inputs(text: str) -> tuple[Circuit, Optional[Environment]]:
    r = _LineReader(text)
    parts, closer = r.block(())
    if closer:
        raise r.error(f"unexpected {closer!r}")
    return _from_items(parts), r.inputs


def parse_circuit(text: str) -> Circuit:
    return parse_circuit_with_inputs(text)[0]


# ---------------------------------------------------------------- JSON mirror


def circuit_to_json(c: Circuit):
    if isinstance(c, GateApp):
        out = {"type": "gate", "name": c.gate, "in": list(c.ins), "out": list(c.outs)}
        if c.meas_index is not None:
            out["measIndex"] = c.meas_index
        return out
    if isinstance(c, Seq):
        return {"type": "seq", "parts": [circuit_to_json(p) for p in c.parts]}
    return {"type": "ite", "guard": c.guard, "then": circuit_to_json(c.then_c),
            "else": circuit_to_json(c.else_c)}


def circuit_from_json(obj) -> Circuit:
    kind = obj["type"]
    if kind == "gate":
        return GateApp(obj["name"], tuple(obj["in"]), tuple(obj["out"]), obj.get("measIndex"))
    if kind == "seq":
        return Seq(tuple(circuit_from_json(p) for p in obj["parts"]))
    if kind == "ite":
        return Ite(obj["guard"], circuit_from_json(obj["then"]), circuit_from_json(obj["else"]))
    raise ValueError(f"unknown circuit node {kind!r}")


def dumps_json(c: Circuit) -> str:
    return json.dumps(circuit_to_json(c), indent=2)
