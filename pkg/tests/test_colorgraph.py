import pytest

from goiqc.colorgraph import (
    ColoredFormula,
    DependencyGraph,
    all_cycles,
    color_infer,
    is_acyclic,
    match_graph,
    sync_points,
    token_path_graph,
)
from goiqc.corpus import BELL, COIN, PQ, RUW
from goiqc.derivation import infer
from goiqc.errors import ShapeMismatch
from goiqc.syntax import QBIT, parse_term, parse_type
from goiqc.tokenmachine import run


def test_match_graph_of_higher_order_formulas():
    t = parse_type("(qbit -o qbit) -o bit")
    a = ColoredFormula(t, (1, 2, None))
    b = ColoredFormula(t, (2, 3, None))
    g = match_graph(a, b)
    assert g.edges == {(2, 1), (2, 3)}


def test_match_graph_of_a_positive_atom():
    g = match_graph(ColoredFormula(QBIT, (1,)), ColoredFormula(QBIT, (1,)))
    assert g.edges == {(1, 1)}
    ok, cycle = is_acyclic(g)
    assert not ok and cycle == [1]


def test_match_graph_requires_equal_shapes():
    with pytest.raises(ShapeMismatch):
        match_graph(ColoredFormula(QBIT, (1,)), ColoredFormula(parse_type("bit"), (2,)))


def test_sync_points_start_at_one_and_put_outer_conditionals_first():
    d = infer(parse_term(RUW))
    points = sync_points(d)
    assert [p.index for p in points] == list(range(1, len(points) + 1))
    assert points[0].kind == "ite"
    assert {points[1].kind, points[2].kind} == {"gate"}  # S and T


def test_ruw_has_the_two_cycle():
    _, g = color_infer(infer(parse_term(RUW)))
    assert {(1, 2), (2, 1)} <= g.edges
    ok, cycle = is_acyclic(g)
    assert not ok
    assert [1, 2] in [sorted(c) for c in all_cycles(g)]


def test_pq_is_cyclic():
    _, g = color_infer(infer(parse_term(PQ)))
    assert not is_acyclic(g)[0]


@pytest.mark.parametrize("src", [BELL, COIN, "(if meas (H (new ff)) then \\q. H q else \\q. S q) (new ff)"])
def test_first_order_terms_are_acyclic(src):
    _, g = color_infer(infer(parse_term(src)))
    assert is_acyclic(g) == (True, None)


@pytest.mark.parametrize("src", [BELL, COIN, RUW, PQ])
def test_colored_graph_matches_token_paths(src):
    d = infer(parse_term(src))
    _, g = color_infer(d)
    assert g == token_path_graph(d)


def test_colored_judgments_are_readable():
    cd, _ = color_infer(infer(parse_term(r"\x. H x")))
    assert "qbit -o qbit" in cd.judgment(0)


def test_cycle_iff_sync_only_deadlock_on_examples():
    for src in (BELL, COIN, RUW, PQ):
        d = infer(parse_term(src))
        assert (not is_acyclic(color_infer(d)[1])[0]) == run(d, "sync-only").deadlocked


def test_dot_output():
    g = DependencyGraph(frozenset({1, 2}), frozenset({(1, 2)}))
    dot = g.to_dot()
    assert dot.startswith("digraph") and "1 -> 2;" in dot
