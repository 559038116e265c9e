import numpy as np
import pytest

from goiqc.circuit import gates, has_ite
from goiqc.corpus import BELL, COIN, PQ, RUW, chain
from goiqc.cpm import QCRegister, block_for, interp_circuit, mix
from goiqc.derivation import infer
from goiqc.errors import Deadlock, StepBudgetExceeded
from goiqc.extcircuit import Branch, branch_labels, size_ext
from goiqc.syntax import QBIT, parse_term
from goiqc.tokenmachine import (
    MODES,
    compile_derivation,
    enabled_moves,
    init,
    input_env,
    is_final,
    output_env,
    run,
)

EMPTY_STATE = mix(QCRegister.make([], np.ones(1), {}))


def _out(src, mode):
    d = infer(parse_term(src))
    c, env_in, env_out = compile_derivation(d, mode)
    return interp_circuit(c, env_in)(EMPTY_STATE), env_out


@pytest.mark.parametrize("mode", MODES)
def test_coin_is_fair_in_every_mode(mode):
    st, env = _out(COIN, mode)
    (b,) = env
    assert abs(block_for(st, env, {b: 1})[0, 0] - 0.5) <= 1e-9
    assert abs(block_for(st, env, {b: 0})[0, 0] - 0.5) <= 1e-9


def test_every_intermediate_configuration_is_well_typed():
    for src in (BELL, COIN, "(if meas (H (new ff)) then \\q. H q else \\q. S q) (new ff)"):
        for mode in MODES:
            run(infer(parse_term(src)), mode, check=True)


def test_initial_tokens_and_final_state():
    d = infer(parse_term(BELL))
    cfg = init(d)
    assert not is_final(cfg)
    assert len(cfg.tokens) == 2  # the two * of the zero gates
    res = run(d)
    assert is_final(res.config) and not res.deadlocked
    assert input_env(res.config) == {}
    assert sorted(output_env(res.config).values(), key=str) == [QBIT, QBIT]


def test_structural_steps_rename_wires_only():
    d = infer(parse_term(r"(\x. x) (new ff)"))
    c, _, env_out = compile_derivation(d)
    names = [g.gate for g in gates(c)]
    assert names.count("new") == 1 and names.count("zero") == 1


def test_scheduler_prefers_synchronous_then_gates():
    d = infer(parse_term(BELL))
    moves = enabled_moves(init(d))
    assert [m.kind for m in moves] == sorted(m.kind for m in moves)


def test_async_split_emits_branches_and_sync_emits_conditionals():
    d = infer(parse_term("(if meas (H (new ff)) then \\q. H q else \\q. S q) (new ff)"))
    a = run(d, "async-only").circuit
    s = run(d, "sync-first").circuit
    assert isinstance(a, Branch) and len(branch_labels(a)) == 1
    assert not isinstance(s, Branch) and has_ite(s.circuit)


def test_sync_only_deadlocks_on_ruw_and_pq():
    for src in (RUW, PQ):
        d = infer(parse_term(src))
        assert run(d, "sync-only").deadlocked
        with pytest.raises(Deadlock):
            compile_derivation(d, "sync-only")
        assert not run(d, "sync-first").deadlocked


def test_meas_indices_are_distinct_and_dense():
    d = infer(parse_term(PQ))
    for mode in ("async-only", "sync-first"):
        c, _, _ = compile_derivation(d, mode)
        idx = sorted({g.meas_index for g in gates(c) if g.gate == "meas"})
        assert idx == list(range(len(idx)))


def test_step_budget_is_enforced(monkeypatch):
    monkeypatch.setenv("GOIQC_STEP_BUDGET", "3")
    with pytest.raises(StepBudgetExceeded):
        run(infer(parse_term(BELL)))


def test_async_circuits_grow_exponentially_on_chains():
    sizes = [size_ext(run(infer(chain(n)), "async-only").circuit) for n in range(1, 5)]
    assert all(b >= 1.8 * a for a, b in zip(sizes, sizes[1:]))


def test_open_terms_compile_with_input_wires():
    d = infer(parse_term("(if meas (H (new ff)) then \\x. H x else \\x. x) q"), {"q": QBIT})
    c, env_in, env_out = compile_derivation(d)
    assert list(env_in.values()) == [QBIT] and list(env_out.values()) == [QBIT]
    assert list(env_in) != list(env_out)
