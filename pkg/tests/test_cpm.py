import functools
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from goiqc.circuit import EMPTY, GATES, Ite, gate, seq
from goiqc.corpus import random_circuit
from goiqc.cpm import (
    CpmState,
    QCRegister,
    block_for,
    density_state,
    interp_circuit,
    interp_env,
    interp_gate,
    interp_type,
    is_compatible,
    map_equal,
    max_map_difference,
    mix,
    mix_dist,
    slice_interp,
)
from goiqc.errors import NonUniformDistribution, ObjectMismatch
from goiqc.extcircuit import circuit_super_addresses
from goiqc.syntax import BIT, QBIT, Tensor, UNIT

I2 = np.eye(2)
KET = {0: np.array([1, 0], complex), 1: np.array([0, 1], complex)}


def test_objects_of_types_and_environments():
    assert interp_type(BIT) == (1, 1)
    assert interp_type(QBIT) == (2,)
    assert interp_type(UNIT) == (1,)
    assert interp_type(Tensor(QBIT, BIT)) == (2, 2)
    assert interp_env({"a": QBIT, "b": BIT, "c": BIT}) == (2, 2, 2, 2)


def test_new_prepares_basis_states():
    m = interp_circuit(gate("new", ["b"], ["q"]), {"b": BIT})
    for v in (0, 1):
        out = m(density_state({"b": BIT}, {(v,): [[1]]}))
        assert np.allclose(out.blocks[0], np.outer(KET[v], KET[v]))


def test_measurement_reads_the_diagonal():
    rho = np.array([[0.25, 0.1 + 0.2j], [0.1 - 0.2j, 0.75]])
    out = interp_circuit(gate("meas", ["q"], ["b"]), {"q": QBIT})(density_state({"q": QBIT}, {(): rho}))
    assert np.isclose(block_for(out, {"b": BIT}, {"b": 0})[0, 0], 0.25)
    assert np.isclose(block_for(out, {"b": BIT}, {"b": 1})[0, 0], 0.75)


def test_constants_and_discard():
    one = interp_circuit(gate("one", [], ["b"]), {})(CpmState((1,), (np.ones((1, 1)),)))
    assert np.isclose(block_for(one, {"b": BIT}, {"b": 1})[0, 0], 1)
    assert np.isclose(block_for(one, {"b": BIT}, {"b": 0})[0, 0], 0)
    gone = interp_circuit(gate("discard", ["b"], []), {"b": BIT})(
        density_state({"b": BIT}, {(0,): [[0.3]], (1,): [[0.7]]}))
    assert np.isclose(gone.blocks[0][0, 0], 1.0)


def _kron(*ms):
    return functools.reduce(np.kron, ms)


_ONE_QUBIT = ["H", "S", "T", "X"]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(_ONE_QUBIT + ["CNOT", "CNOT10"]), st.integers(0, 1)),
                min_size=1, max_size=8))
def test_unitary_circuits_match_matrix_products(ops):
    """Oracle: multiply the Kronecker-expanded gate matrices by hand."""
    labels = ["a", "b"]
    c, u = [], np.eye(4, dtype=complex)
    for name, k in ops:
        if name == "CNOT":
            c.append(gate("CNOT", ["a", "b"], ["a", "b"]))
            g = GATES["CNOT"].matrix
        elif name == "CNOT10":
            c.append(gate("CNOT", ["b", "a"], ["b", "a"]))
            swap = np.eye(4)[[0, 2, 1, 3]]
            g = swap @ GATES["CNOT"].matrix @ swap
        else:
            c.append(gate(name, [labels[k]], [labels[k]]))
            m = GATES[name].matrix
            g = _kron(m, I2) if k == 0 else _kron(I2, m)
        u = g @ u
    env = {"a": QBIT, "b": QBIT}
    rng = np.random.default_rng(len(ops))
    psi = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi /= np.linalg.norm(psi)
    out = interp_circuit(seq(*c), env)(density_state(env, {(): np.outer(psi, psi.conj())}))
    expect = u @ np.outer(psi, psi.conj()) @ u.conj().T
    assert np.abs(out.blocks[0] - expect).max() <= 1e-9


def test_cswap_swaps_first_two_wires_when_third_is_one():
    m = GATES["CSWAP"].matrix
    for i, j, k in np.ndindex(2, 2, 2):
        src = _kron(KET[i], KET[j], KET[k])
        dst = _kron(KET[j], KET[i], KET[k]) if k else src
        assert np.allclose(m @ src, dst)


def test_bell_circuit_density():
    c = seq(gate("zero", [], ["b1"]), gate("new", ["b1"], ["q1"]), gate("H", ["q1"], ["q1"]),
            gate("zero", [], ["b2"]), gate("new", ["b2"], ["q2"]),
            gate("CNOT", ["q1", "q2"], ["q1", "q2"]))
    out = interp_circuit(c, {})(CpmState((1,), (np.ones((1, 1)),)))
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert out.distance(CpmState((4,), (np.outer(bell, bell),))) <= 1e-9


def test_conditional_sums_both_branches():
    c = Ite("g", gate("X", ["q"], ["q"]), EMPTY)
    env = {"g": BIT, "q": QBIT}
    st_in = density_state(env, {(1,): 0.5 * np.outer(KET[0], KET[0]), (0,): 0.5 * np.outer(KET[0], KET[0])})
    out = interp_circuit(c, env)(st_in)
    assert np.allclose(out.blocks[0], np.diag([0.5, 0.5]))


def test_maps_are_trace_preserving_on_random_circuits():
    rng = random.Random(5)
    for _ in range(20):
        c, env = random_circuit(rng, 2, 1, 6)
        m = interp_circuit(c, env)
        rho = np.diag([0.1, 0.2, 0.3, 0.4]).astype(complex)
        out = m(density_state(env, {(0,): rho / 2, (1,): rho / 2}))
        assert abs(out.trace() - 1) <= 1e-9


def test_map_equal_examples():
    env = {"q": QBIT}
    h = interp_circuit(gate("H", ["q"], ["q"]), env)
    assert map_equal(h, h)
    hsh = interp_circuit(seq(gate("H", ["q"], ["q"]), gate("S", ["q"], ["q"]), gate("H", ["q"], ["q"])), env)
    s = interp_circuit(gate("S", ["q"], ["q"]), env)
    assert not map_equal(hsh, s)
    assert max_map_difference(hsh, s) > 0.1


def test_map_equal_rejects_different_objects():
    with pytest.raises(ObjectMismatch):
        map_equal(interp_gate(GATES["H"]), interp_gate(GATES["CNOT"]))


def test_slices_sum_to_the_whole_map():
    c = seq(gate("H", ["q"], ["q"]), gate("meas", ["q"], ["g"], 0),
            Ite("g", seq(gate("zero", [], ["c"]), gate("new", ["c"], ["r"]), gate("H", ["r"], ["r"]),
                         gate("meas", ["r"], ["h"], 1)), gate("one", [], ["h"])))
    env = {"q": QBIT}
    sups = circuit_super_addresses(c)
    assert all(is_compatible(c, s) for s in sups)
    total = None
    for s in sups:
        m = slice_interp(c, s, env)
        total = m if total is None else total + m
    assert map_equal(total, interp_circuit(c, env))


def test_mix_of_registers():
    r = QCRegister.make([("q", QBIT), ("b", BIT)], KET[1], {"b": 1})
    st_ = mix(r)
    assert np.allclose(block_for(st_, r.env, {"b": 1}), np.outer(KET[1], KET[1]))
    assert np.allclose(block_for(st_, r.env, {"b": 0}), 0)
    half = mix_dist([(r, 0.5), (QCRegister.make([("q", QBIT), ("b", BIT)], KET[0], {"b": 0}), 0.5)])
    assert abs(half.trace() - 1) <= 1e-12
    with pytest.raises(NonUniformDistribution):
        mix_dist([(r, 0.5), (QCRegister.make([("p", QBIT)], KET[0]), 0.5)])


def test_register_label_order_does_not_matter():
    psi = _kron(KET[0], KET[1])
    a = QCRegister.make([("x", QBIT), ("y", QBIT)], psi)
    b = QCRegister.make([("y", QBIT), ("x", QBIT)], _kron(KET[1], KET[0]))
    assert mix(a).distance(mix(b)) <= 1e-12
