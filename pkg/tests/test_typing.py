import json

import pytest

from goiqc.corpus import BELL, COIN, PQ, RUW
from goiqc.derivation import (
    all_positions,
    infer,
    label_key,
    labeling,
    node_positions,
    position_sets,
    to_json,
)
from goiqc.errors import BranchMismatch, LinearityError, TypeMismatch
from goiqc.syntax import BIT, QBIT, Lolli, Tensor, parse_term


@pytest.mark.parametrize("src, ty", [
    (COIN, BIT),
    (BELL, Tensor(QBIT, QBIT)),
    (RUW, Lolli(QBIT, QBIT)),
    (PQ, Lolli(QBIT, QBIT)),
    (r"\x. x", Lolli(QBIT, QBIT)),  # unconstrained variables default to qbit
    ("new tt", QBIT),
    ("let * = discard tt in ff", BIT),
])
def test_inferred_types(src, ty):
    assert infer(parse_term(src)).type == ty


def test_open_term_uses_declared_context():
    d = infer(parse_term("(H q, b)"), {"q": QBIT, "b": BIT})
    assert d.type == Tensor(QBIT, BIT)
    assert dict(d.context) == {"q": QBIT, "b": BIT}


@pytest.mark.parametrize("src", [r"\x. (x, x)", r"\x. tt", "let (a, b) = (tt, ff) in a"])
def test_linearity_violations(src):
    with pytest.raises(LinearityError):
        infer(parse_term(src))


def test_branches_must_use_the_same_variables():
    with pytest.raises(BranchMismatch):
        infer(parse_term("if tt then q else new ff"), {"q": QBIT})


@pytest.mark.parametrize("src", ["meas tt", "H (tt)", "if new ff then tt else ff", "CNOT (new ff)"])
def test_type_mismatches(src):
    with pytest.raises(TypeMismatch):
        infer(parse_term(src))


def test_nodes_are_numbered_in_preorder():
    d = infer(parse_term(BELL))
    ids = [n.node_id for n in d.nodes()]
    assert ids == sorted(ids) == list(range(len(ids)))
    for n in d.nodes():
        for p in n.premises:
            assert p.node_id > n.node_id


def test_every_premise_context_is_covered_by_its_conclusion():
    d = infer(parse_term(RUW))
    for n in d.nodes():
        names = {x for x, _ in n.context}
        bound = set()
        if n.rule == "Lam":
            bound = {n.term.name}
        elif n.rule == "LetPair":
            bound = {n.term.x, n.term.y}
        for p in n.premises:
            assert {x for x, _ in p.context} <= names | bound


def test_labels_cover_every_position_once_in_creation_order():
    d = infer(parse_term(BELL))
    lab = labeling(d)
    positions = all_positions(d)
    assert len(lab) == len(positions)
    labels = sorted(lab.position, key=label_key)
    assert labels[0] == "l1" and labels[-1] == f"l{len(positions)}"
    root_first = node_positions(d)
    assert [lab[p] for p in root_first] == [f"l{k}" for k in range(1, len(root_first) + 1)]


def test_position_sets_of_bell():
    d = infer(parse_term(BELL))
    s = position_sets(d)
    assert not s.ndata
    assert len(s.pdata) == 2
    assert len(s.ones) == 2  # the two * arguments


def test_guard_positions_are_ite_guards():
    d = infer(parse_term(PQ))
    s = position_sets(d)
    assert len(s.guard) == 2
    for p in s.guard:
        assert p.kind == "bit" and p.positive


def test_json_export_lists_every_node():
    d = infer(parse_term(COIN))
    rows = json.loads(to_json(d))
    assert [r["nodeId"] for r in rows] == list(range(len(rows)))
    assert rows[0]["judgment"].endswith(": bit")
