import random

import pytest
from hypothesis import given, settings, strategies as st

from goiqc.circuit import (
    EMPTY,
    Ite,
    Seq,
    circuit_from_json,
    circuit_to_json,
    gate,
    infer_inputs,
    normalize,
    parse_circuit,
    parse_circuit_with_inputs,
    rename,
    seq,
    serialize,
    size,
    typecheck_circuit,
)
from goiqc.corpus import random_circuit
from goiqc.errors import (
    BranchEnvMismatch,
    IllTyped,
    LabelClash,
    ParseError,
    SignatureArityMismatch,
    UnboundLabel,
)
from goiqc.syntax import BIT, QBIT

BELL_QC = """\
# inputs
zero () -> b1
new b1 -> q1
H q1 -> q1
zero () -> b2
new b2 -> q2
CNOT q1,q2 -> q1,q2
"""


def test_typecheck_bell_circuit():
    c, header = parse_circuit_with_inputs(BELL_QC)
    assert header == {}
    assert typecheck_circuit(c, {}) == {"q1": QBIT, "q2": QBIT}


def test_untouched_wires_pass_through():
    out = typecheck_circuit(gate("H", ["a"], ["a"]), {"a": QBIT, "b": BIT})
    assert out == {"a": QBIT, "b": BIT}


@pytest.mark.parametrize("c, env, err", [
    (gate("H", ["a"], ["a"]), {}, UnboundLabel),
    (gate("new", ["b"], ["q"]), {"b": BIT, "q": QBIT}, LabelClash),
    (gate("CNOT", ["a"], ["a"]), {"a": QBIT}, SignatureArityMismatch),
    (gate("H", ["b"], ["b"]), {"b": BIT}, IllTyped),
    (gate("FOO", ["a"], ["a"]), {"a": QBIT}, IllTyped),
    (Ite("g", gate("discard", ["b"], []), EMPTY), {"g": BIT, "b": BIT}, BranchEnvMismatch),
    (Ite("q", EMPTY, EMPTY), {"q": QBIT}, IllTyped),
])
def test_circuit_typing_errors(c, env, err):
    with pytest.raises(err):
        typecheck_circuit(c, env)


def test_same_label_in_and_out_is_allowed():
    assert typecheck_circuit(gate("new", ["l3"], ["l3"]), {"l3": BIT}) == {"l3": QBIT}


def test_seq_flattens_and_empty_is_identity():
    a, b = gate("H", ["q"], ["q"]), gate("S", ["q"], ["q"])
    assert seq(a, seq(b), EMPTY) == Seq((a, b))
    assert seq(a) == a
    assert typecheck_circuit(EMPTY, {"q": QBIT}) == {"q": QBIT}


def test_size_counts_gates_and_conditionals():
    c = seq(gate("H", ["q"], ["q"]), Ite("g", gate("S", ["q"], ["q"]), EMPTY))
    assert size(c) == 3


def test_infer_inputs_finds_minimal_environment():
    c = parse_circuit("meas a -> b\nif g {\n  X c -> c\n} else {\n}\n")
    assert infer_inputs(c) == {"a": QBIT, "g": BIT, "c": QBIT}


def test_rename_is_total_on_mapping():
    c = Ite("g", gate("H", ["q"], ["q"]), EMPTY)
    assert rename(c, {"g": "h", "q": "r"}) == Ite("h", gate("H", ["r"], ["r"]), EMPTY)


def test_serialized_text_round_trips_with_meas_indices():
    c = seq(gate("meas", ["q"], ["b"], 3), Ite("b", gate("zero", [], ["c"]), gate("one", [], ["c"])))
    text = serialize(c, {"q": QBIT})
    assert "# meas-index 3" in text
    back, header = parse_circuit_with_inputs(text)
    assert back == normalize(c) and header == {"q": QBIT}


def test_parse_errors_report_lines():
    with pytest.raises(ParseError) as info:
        parse_circuit("H q -> q\nif g {\n  S q -> q\n")
    assert info.value.line >= 3


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_random_circuits_round_trip_through_text_and_json(seed):
    c, env = random_circuit(random.Random(seed), 2, 2, 6)
    assert parse_circuit(serialize(c)) == normalize(c)
    assert circuit_from_json(circuit_to_json(c)) == normalize(c)
    typecheck_circuit(c, env)
