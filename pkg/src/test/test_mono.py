import itertools
import json

import numpy as np
import pytest

from ..analysis.mono import (
    ChainStep,
    Labeling,
    MonotonicityKind,
    ParityUnionFind,
    RGraph,
    build_r_graph,
    classify_chain,
    classify_monotonicity,
    classify_with_labeling,
    consistent_labeling,
    endpoint_verification,
    to_dot,
)
from ..analysis.reports import AlphaStatus
from ..crn.model import Interval, parse_network
from ..crn.odesim import SimOptions


def _net(species, reactions):
    return parse_network(json.dumps({
        "species": [{"name": s, "initial": 1 if i == 0 else 0} for i, s in enumerate(species)],
        "reactions": [
            {"id": rid, "reactants": [[n, 1] for n in lhs], "products": [[n, 1] for n in rhs],
             "modifiers": list(mods), "rate": 1.0}
            for rid, lhs, rhs, mods in reactions
        ],
    }))


A_TO_B = _net("AB", [("R1", "A", "B", "")])
COMPETING = _net("ABC", [("R1", "A", "B", ""), ("R2", "A", "C", "")])
CONFLICT = _net("ABC", [("R1", "A", "B", ""), ("R2", "AB", "C", "")])


def test_r_graph_of_erk_subnetwork(erk):
    net, _, _ = erk
    sub = net.subnetwork(["R21", "R23"])
    g = build_r_graph(sub)
    assert g.reactions == ("R21", "R23")
    assert g.e_plus == {(0, 1)}
    assert g.e_minus == frozenset()


def test_r_graph_edge_kinds():
    assert build_r_graph(COMPETING).e_minus == {(0, 1)}
    assert build_r_graph(COMPETING).e_plus == frozenset()
    g = build_r_graph(CONFLICT)
    assert (0, 1) in g.e_plus and (0, 1) in g.e_minus


def test_modifiers_do_not_create_edges():
    net = _net("ABC", [("R1", "A", "B", ""), ("R2", "C", "", "B")])
    g = build_r_graph(net)
    assert not g.e_plus and not g.e_minus


def test_reversible_pairs_block_labeling_of_full_erk(erk):
    net, _, _ = erk
    g = build_r_graph(net.subnetwork(["R18", "R19"]))
    # 正反两个方向互为产物 / 反应物
    assert g.e_plus == {(0, 1)}
    assert g.e_minus == frozenset()
    # R21 = R27 = R23，但 R27 与 R23 共享反应物 PMek1
    assert consistent_labeling(build_r_graph(net)) is None


def test_consistent_labeling_examples():
    assert consistent_labeling(RGraph(("a", "b"), frozenset({(0, 1)}), frozenset())).signs == (1, 1)
    assert consistent_labeling(RGraph(("a", "b", "c"), frozenset(), frozenset())).signs == (1, 1, 1)
    assert consistent_labeling(RGraph(("a", "b"), frozenset({(0, 1)}), frozenset({(0, 1)}))) is None
    triangle = RGraph(("a", "b", "c"), frozenset(), frozenset({(0, 1), (1, 2), (0, 2)}))
    assert consistent_labeling(triangle) is None
    path = RGraph(("a", "b", "c"), frozenset(), frozenset({(0, 1), (1, 2)}))
    assert consistent_labeling(path).signs == (1, -1, 1)


def test_first_node_of_each_component_is_positive():
    g = RGraph(tuple("abcde"), frozenset({(3, 4)}), frozenset({(1, 2), (0, 2)}))
    labeling = consistent_labeling(g)
    assert labeling.signs == (1, 1, -1, 1, 1)
    assert labeling.satisfies(g)


def _random_graph(rng, n):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    density = rng.uniform(0.05, 0.4)
    plus, minus = set(), set()
    for p in pairs:
        r = rng.random()
        if r < density / 2:
            plus.add(p)
        elif r < density:
            minus.add(p)
    return RGraph(tuple(f"r{k}" for k in range(n)), frozenset(plus), frozenset(minus))


def test_labeling_agrees_with_brute_force():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(1, 13))
        g = _random_graph(rng, n)
        feasible = any(Labeling(signs).satisfies(g) for signs in itertools.product((1, -1), repeat=n))
        labeling = consistent_labeling(g)
        assert (labeling is not None) == feasible
        if labeling is not None:
            assert labeling.satisfies(g)


def test_parity_union_find_detects_odd_cycle():
    uf = ParityUnionFind(4)
    assert uf.union(0, 1, 1)
    assert uf.union(1, 2, 1)
    assert uf.union(2, 3, 0)
    assert uf.find(3) == (0, 0)
    assert not uf.union(0, 3, 1)


def test_erk_subnetwork_is_positively_monotonic(erk):
    net, _, _ = erk
    verdict = classify_monotonicity(net.subnetwork(["R21", "R23"]), "Mek1", "PPMek1")
    assert verdict.kind is MonotonicityKind.POSITIVE
    assert verdict.witness == {"R21": "+", "R23": "+"}
    assert verdict.input_reaction == "R21" and verdict.output_reaction == "R23"
    assert verdict.input_product == -1 and verdict.output_product == 1


def test_single_reaction_chain():
    verdict = classify_monotonicity(A_TO_B, "A", "B")
    assert verdict.kind is MonotonicityKind.POSITIVE


def test_negative_monotonicity():
    # A 与 B 竞争反应物 X：A 越多，消耗的 X 越多，B 越少
    net = _net("XAPBQ", [("R1", "XA", "P", ""), ("R2", "XB", "Q", "")])
    verdict = classify_monotonicity(net, "A", "Q")
    assert verdict.kind is MonotonicityKind.NEGATIVE


def test_inconclusive_reasons(erk):
    assert classify_monotonicity(CONFLICT, "A", "C").failed_condition == "labeling"
    net, _, _ = erk
    verdict = classify_monotonicity(net.subnetwork(["R21", "R27", "R23"]), "Mek1", "PPMek1")
    assert verdict.kind is MonotonicityKind.INCONCLUSIVE
    assert verdict.failed_condition in {"labeling", "input"}
    chain = _net("ABCD", [("R1", "A", "B", ""), ("R2", "C", "D", "")])
    verdict = classify_monotonicity(chain, "A", "D")
    assert verdict.failed_condition == "connectivity"
    assert not verdict.monotone


def test_invalid_species():
    with pytest.raises(ValueError):
        classify_monotonicity(A_TO_B, "A", "A")
    with pytest.raises(ValueError):
        classify_monotonicity(A_TO_B, "A", "Z")


def test_global_flip_preserves_classification():
    rng = np.random.default_rng(8)
    nets = [A_TO_B, _net("XAPBQ", [("R1", "XA", "P", ""), ("R2", "XB", "Q", "")]),
            _net("ABCD", [("R1", "A", "B", ""), ("R2", "B", "C", ""), ("R3", "C", "D", "")])]
    for net in nets:
        g = build_r_graph(net)
        labeling = consistent_labeling(g)
        for _ in range(5):
            names = list(net.species_names)
            a, b = rng.choice(len(names), size=2, replace=False)
            first = classify_with_labeling(net, names[a], names[b], labeling, g)
            flipped = classify_with_labeling(net, names[a], names[b], labeling.flipped(), g)
            assert first.kind == flipped.kind


def test_classification_invariant_under_reordering():
    rng = np.random.default_rng(4)
    reactions = [("R1", "A", "B", ""), ("R2", "B", "C", ""), ("R3", "C", "D", "E"), ("R4", "E", "", "")]
    species = "ABCDE"
    base = classify_monotonicity(_net(species, reactions), "A", "D").kind
    for _ in range(10):
        order = rng.permutation(len(reactions))
        shuffled = _net(species, [reactions[k] for k in order])
        assert classify_monotonicity(shuffled, "A", "D").kind == base


def test_chain_composes_signs(erk):
    net, _, _ = erk
    steps = [ChainStep.parse("R18:Raf:PRaf"), ChainStep.parse("R21,R23:Mek1:PPMek1")]
    verdict = classify_chain(net, steps)
    assert verdict.kind is MonotonicityKind.POSITIVE
    assert verdict.input == "Raf" and verdict.output == "PPMek1"
    assert len(verdict.steps) == 2

    bad = classify_chain(net, [ChainStep.parse("R18,R19:Raf:PRaf")])
    assert bad.kind is MonotonicityKind.INCONCLUSIVE
    assert "step 1" in bad.reason

    with pytest.raises(ValueError):
        ChainStep.parse("R18:Raf")
    with pytest.raises(ValueError):
        classify_chain(net, [ChainStep.parse("R99:Raf:PRaf")])


def test_endpoint_verification_full_conversion():
    """A -> B：B 的稳态等于 A 的初值，故 spread = 1"""
    sim = SimOptions(t_end=50.0, output_points=101)
    verdict = classify_monotonicity(A_TO_B, "A", "B")
    report = endpoint_verification(A_TO_B, "A", Interval(1, 2), "B", 1 + 1e-5, sim, verdict)
    assert report.robust
    assert report.status is AlphaStatus.VERIFIED
    assert report.probes == 2
    assert report.spread == pytest.approx(1.0, abs=1e-5)
    assert report.observed_min == pytest.approx(1.0, abs=1e-5)
    assert report.center_k == pytest.approx(1.5, abs=1e-5)
    assert report.strategy_used == "monotone_endpoints"
    assert not endpoint_verification(A_TO_B, "A", Interval(1, 2), "B", 0.5, sim, verdict).robust


def test_endpoint_verification_trivial_interval():
    sim = SimOptions(t_end=50.0, output_points=101)
    report = endpoint_verification(A_TO_B, "A", Interval(1, 1), "B", 0.0, sim)
    assert report.spread == 0.0
    assert report.robust


def test_endpoint_verification_requires_monotone_verdict():
    verdict = classify_monotonicity(CONFLICT, "A", "C")
    with pytest.raises(ValueError):
        endpoint_verification(CONFLICT, "A", Interval(1, 2), "C", 1.0, SimOptions(t_end=1.0), verdict)


def test_endpoint_verification_classifies_when_no_verdict_is_given():
    sim = SimOptions(t_end=30.0, output_points=61)
    report = endpoint_verification(CONFLICT, "A", Interval(1, 2), "C", 10.0, sim)
    assert report.status is AlphaStatus.APPROXIMATE
    assert not report.exact
    certified = endpoint_verification(A_TO_B, "A", Interval(1, 2), "B", 10.0, sim)
    assert certified.status is AlphaStatus.VERIFIED
    assert certified.exact


def test_endpoint_verification_rejects_verdict_for_other_species():
    net = _net("ABC", [("R1", "A", "B", ""), ("R2", "C", "", "")])
    verdict = classify_monotonicity(A_TO_B, "A", "B")
    assert verdict.monotone
    with pytest.raises(ValueError, match="verdict covers"):
        endpoint_verification(net, "C", Interval(1, 2), "B", 1.0, SimOptions(t_end=1.0), verdict)


def test_dot_export(erk):
    net, _, _ = erk
    sub = net.subnetwork(["R21", "R23"])
    g = build_r_graph(sub)
    text = to_dot(sub, g, consistent_labeling(g))
    assert text.startswith("graph R {")
    assert '"R21" [label="R21 +"];' in text
    assert '"R21" -- "R23" [style=solid];' in text
    assert "dashed" not in text
    assert "dashed" in to_dot(COMPETING)
