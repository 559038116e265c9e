import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goiqc.circuit import EMPTY, Ite, gate, has_ite, seq, size, typecheck_circuit
from goiqc.corpus import random_circuit
from goiqc.cpm import density_state, interp_circuit, map_equal
from goiqc.errors import ShapeMismatch
from goiqc.ite_elim import SwapPlan, eliminate, sigma, tau_swap
from goiqc.syntax import BIT, QBIT


def _fed(value: int, body, env):
    """Prefix ``body`` with a constant on the guard ``g``."""
    return seq(gate("one" if value else "zero", [], ["g"]), body), env


def test_sigma_qubit_with_guard_one_is_a_swap():
    env = {"a": QBIT, "b": QBIT}
    c, _ = _fed(1, seq(sigma(("a", "b", "g"), QBIT), gate("discard", ["g"], [])), env)
    swap = seq(gate("id", ["a"], ["t"]), gate("id", ["b"], ["a"]), gate("id", ["t"], ["b"]))
    assert map_equal(interp_circuit(c, env), interp_circuit(swap, env))


def test_sigma_qubit_with_guard_zero_is_identity():
    env = {"a": QBIT, "b": QBIT}
    c, _ = _fed(0, seq(sigma(("a", "b", "g"), QBIT), gate("discard", ["g"], [])), env)
    assert map_equal(interp_circuit(c, env), interp_circuit(EMPTY, env))


def test_sigma_bit_with_guard_one_swaps_values():
    env = {"a": BIT, "b": BIT}
    c, _ = _fed(1, seq(sigma(("a", "b", "g"), BIT), gate("discard", ["g"], [])), env)
    out = interp_circuit(c, env)(density_state(env, {(0, 1): [[1.0]]}))
    assert np.isclose(out.blocks[_index(env, a=1, b=0)][0, 0], 1.0)


def _index(env, **values):
    from goiqc.cpm import block_index

    return block_index(env, values)


def test_tau_swap_of_empty_environments_is_identity():
    assert tau_swap({}, {}, "g") == EMPTY


def test_tau_swap_of_one_pair_is_one_sigma():
    assert tau_swap({"a": QBIT}, {"b": QBIT}, "g") == sigma(("a", "b", "g"), QBIT)


def test_tau_swap_of_mixed_environments_swaps_everything():
    env = {"a": QBIT, "x": BIT, "b": QBIT, "y": BIT}
    c, _ = _fed(1, seq(tau_swap([("a", QBIT), ("x", BIT)], [("b", QBIT), ("y", BIT)], "g"),
                       gate("discard", ["g"], [])), env)
    # oracle: an explicit relabelling of the wires
    perm = seq(gate("id", ["a"], ["t"]), gate("id", ["b"], ["a"]), gate("id", ["t"], ["b"]),
               gate("idb", ["x"], ["u"]), gate("idb", ["y"], ["x"]), gate("idb", ["u"], ["y"]))
    assert map_equal(interp_circuit(c, env), interp_circuit(perm, env))


def test_tau_swap_rejects_different_shapes():
    with pytest.raises(ShapeMismatch):
        tau_swap({"a": QBIT}, {"b": BIT}, "g")
    with pytest.raises(ShapeMismatch):
        SwapPlan.of({"a": QBIT}, {}, "g")


def test_plain_circuits_are_unchanged():
    c = seq(gate("H", ["q"], ["q"]), gate("meas", ["q"], ["b"], 0))
    assert eliminate(c, {"q": QBIT}) == c


def test_single_conditional_over_one_qubit():
    env = {"g": BIT, "q": QBIT}
    c = Ite("g", gate("H", ["q"], ["q"]), gate("S", ["q"], ["q"]))
    e = eliminate(c, env)
    assert not has_ite(e)
    assert map_equal(interp_circuit(c, env), interp_circuit(e, env))


def test_nested_conditionals_stay_linear():
    env = {"g": BIT, "h": BIT, "q": QBIT}
    inner = Ite("h", gate("H", ["q"], ["q"]), gate("T", ["q"], ["q"]))
    c = Ite("g", inner, seq(gate("discard", ["h"], []), gate("X", ["q"], ["q"])))
    e = eliminate(c, env)
    assert not has_ite(e)
    assert typecheck_circuit(e, env) == typecheck_circuit(c, env)
    assert map_equal(interp_circuit(c, env), interp_circuit(e, env))
    assert size(e) <= 12 * size(c)


def test_branches_that_create_wires():
    env = {"g": BIT}
    c = Ite("g", seq(gate("one", [], ["b"]), gate("new", ["b"], ["q"])),
            seq(gate("zero", [], ["b"]), gate("new", ["b"], ["q"]), gate("H", ["q"], ["q"])))
    e = eliminate(c, env)
    assert map_equal(interp_circuit(c, env), interp_circuit(e, env))


def test_fresh_labels_avoid_existing_shadows():
    env = {"g": BIT, "sh1": QBIT}
    c = Ite("g", gate("H", ["sh1"], ["sh1"]), EMPTY)
    e = eliminate(c, env)
    assert map_equal(interp_circuit(c, env), interp_circuit(e, env))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 6))
def test_elimination_preserves_semantics_on_random_circuits(seed):
    c, env = random_circuit(random.Random(seed), 1, 2, 5)
    e = eliminate(c, env)
    assert not has_ite(e)
    assert map_equal(interp_circuit(c, env), interp_circuit(e, env))
