import pytest

from goiqc.circuit import EMPTY, Ite, gate, seq, typecheck_circuit
from goiqc.errors import AddressUndefined, NonUniform
from goiqc.extcircuit import (
    Address,
    Branch,
    Leaf,
    addresses,
    at_address,
    branch_labels,
    circuit_super_addresses,
    parse_ext,
    serialize_ext,
    size_ext,
    substitute_at,
    super_addresses,
    tau,
)
from goiqc.syntax import BIT, QBIT

H = gate("H", ["q"], ["q"])
S = gate("S", ["q"], ["q"])
T = gate("T", ["q"], ["q"])


def coin_branch():
    head = seq(gate("zero", [], ["c"]), gate("new", ["c"], ["p"]), gate("H", ["p"], ["p"]),
               gate("meas", ["p"], ["g"], 0))
    return Branch(head, "g", Leaf(H), Leaf(S))


def test_at_address_picks_the_right_leaf():
    e = coin_branch()
    assert at_address(e, Address.of({"g": 1})) == H
    assert at_address(e, Address.of({"g": 0})) == S


@pytest.mark.parametrize("addr", [Address.of({}), Address.of({"h": 1}), Address.of({"g": 1, "h": 0})])
def test_undefined_addresses(addr):
    with pytest.raises(AddressUndefined):
        at_address(coin_branch(), addr)


def test_substitute_at_replaces_one_leaf():
    e = substitute_at(coin_branch(), Address.of({"g": 0}), T)
    assert at_address(e, Address.of({"g": 0})) == T
    assert at_address(e, Address.of({"g": 1})) == H


def test_addresses_and_labels():
    e = coin_branch()
    assert addresses(e) == [Address.of({"g": 1}), Address.of({"g": 0})]
    assert branch_labels(e) == ["g"]
    assert size_ext(e) == 4 + 1 + 1 + 1


def test_tau_turns_branches_into_conditionals():
    e = coin_branch()
    c = tau(e, {"q": QBIT})
    assert c == seq(e.circuit, Ite("g", H, S))
    assert typecheck_circuit(c, {"q": QBIT}) == {"q": QBIT}


def test_tau_rejects_leaves_with_different_wires():
    e = Branch(gate("zero", [], ["g"]), "g", Leaf(gate("discard", ["b"], [])), Leaf(EMPTY))
    with pytest.raises(NonUniform):
        tau(e, {"b": BIT})


def test_super_addresses_fix_every_measurement_on_the_path():
    e = coin_branch()
    sups = super_addresses(e)
    assert len(sups) == 4
    assert Address.of({0: 1, "g": 0}) in sups


def test_circuit_super_addresses_follow_conditionals():
    c = seq(gate("meas", ["a"], ["g"], 0), Ite("g", gate("meas", ["b"], ["x"], 1), EMPTY))
    assert sorted(map(str, circuit_super_addresses(c))) == sorted(map(str, [
        {0: 0, "g": 1, 1: 0}, {0: 0, "g": 1, 1: 1}, {0: 0, "g": 0},
        {0: 1, "g": 1, 1: 0}, {0: 1, "g": 1, 1: 1}, {0: 1, "g": 0}]))


def test_extended_text_round_trip():
    e = coin_branch()
    assert parse_ext(serialize_ext(e)) == e
