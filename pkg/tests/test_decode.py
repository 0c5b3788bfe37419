import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bnqubo.anneal import SampleSet
from bnqubo.dag import CycleError, Dag, format_arcs, parse_arcs
from bnqubo.decode import (
    RAF_NODES,
    Candidate,
    campaign_report,
    decode,
    metrics,
    raf_reference,
    to_dot,
    validate,
)
from bnqubo.qubo import VarRegistry, assemble, encode
from tests.test_qubo import random_table


def _reg(n=4, m=3):
    return VarRegistry.create([f"X{i}" for i in range(n)], m)


# ----------------------------------------------------------------- decode


def test_all_zero_decodes_to_empty_graph():
    reg = _reg()
    c = decode(np.zeros(reg.size), reg)
    assert c.graph.arcs == frozenset()
    assert c.slack == (0, 0, 0, 0)


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_encode_decode_roundtrip(data):
    reg = _reg()
    order = data.draw(st.permutations(range(4)))
    arcs = frozenset(
        (order[a], order[b]) for a in range(4) for b in range(a + 1, 4) if data.draw(st.booleans())
    )
    dag = Dag(reg.names, arcs)
    c = decode(encode(dag, reg), reg)
    assert c.graph.arcs == arcs
    assert validate(c, 3).clean


def test_two_cycle_is_flagged():
    reg = _reg()
    for r01 in (0, 1):
        x = np.zeros(reg.size, dtype=np.uint8)
        x[reg.d(0, 1)] = x[reg.d(1, 0)] = 1
        x[reg.r(0, 1)] = r01
        diag = validate(decode(x, reg), 3)
        assert diag.has_cycle and diag.consistency_violations >= 1


def test_decode_length_checked():
    reg = _reg()
    with pytest.raises(ValueError):
        decode(np.zeros(reg.size + 1), reg)


# --------------------------------------------------------------- validate


def test_chain_with_its_order_is_clean():
    reg = _reg(3, 2)
    chain = Dag(reg.names, frozenset({(0, 1), (1, 2)}))
    assert validate(decode(encode(chain, reg), reg), 2).clean


def test_four_parents_break_the_cap():
    reg = _reg(5, 3)
    arcs = frozenset({(1, 0), (2, 0), (3, 0), (4, 0)})
    c = Candidate(Dag(reg.names, arcs), {(i, j): 0 for i in range(5) for j in range(i + 1, 5)}, (0,) * 5, ())
    diag = validate(c, 3)
    assert diag.cap_violations == (0,)
    assert not diag.has_cycle


def test_transitivity_violation_counted():
    order = {(0, 1): 1, (1, 2): 1, (0, 2): 0}
    c = Candidate(Dag(("a", "b", "c"), frozenset()), order, (1, 1, 1), ())
    assert validate(c, 1).transitivity_violations == 1


# ---------------------------------------------------------------- metrics


def test_reference_network_shape():
    ref = raf_reference()
    assert ref.names == RAF_NODES
    assert len(ref.arcs) == 14
    out = {name: len(ref.children(i)) for i, name in enumerate(ref.names)}
    assert out["PKC"] == 5 and out["PKA"] == 6
    assert not ref.has_cycle()


def test_metrics_identity():
    ref = raf_reference()
    m = metrics(ref, ref)
    assert (m.true_positives, m.false_positives, m.false_negatives) == (14, 0, 0)


def test_metrics_partial():
    ref = raf_reference()
    kept = sorted(ref.arcs)[:9]
    spurious = [(a, b) for a in range(8) for b in range(8) if a != b and (a, b) not in ref.arcs and (b, a) not in ref.arcs]
    cand = Dag(ref.names, frozenset(kept + spurious[:6]))
    m = metrics(cand, ref)
    assert (m.true_positives, m.false_positives, m.false_negatives) == (9, 6, 5)


def test_metrics_empty_candidate():
    ref = raf_reference()
    m = metrics(Dag.empty(8, ref.names), ref)
    assert (m.true_positives, m.false_negatives) == (0, 14)


def test_metrics_orientation_exact():
    ref = Dag(("a", "b"), frozenset({(0, 1)}))
    flipped = Dag(("a", "b"), frozenset({(1, 0)}))
    assert metrics(flipped, ref).true_positives == 0
    assert metrics(flipped, ref, skeleton=True).true_positives == 1


def test_metrics_node_sets_must_match():
    with pytest.raises(ValueError):
        metrics(Dag.empty(2, ("a", "b")), Dag.empty(2, ("a", "c")))


# ----------------------------------------------------------------- report


def test_report_perfect_recovery():
    ref = raf_reference()
    table = random_table(0, 8, 3, rows=100)
    table = type(table)(ref.names, table.m_max, table.scores)
    q = assemble(table, 3)
    x = encode(ref, q.registry)
    sets = [SampleSet.aggregate(q, x[None, :]) for _ in range(3)]
    report = campaign_report(sets, q, ref, table=table)
    assert report.cycles == 0 and report.mean_tp == 14 and report.median_tp == 14
    labels = [k for k, _ in report.aggregates()]
    assert labels == ["instances with cycles", "false positives", "average true positives", "median true positives"]
    assert report.fp_range == (0, 0)
    text = report.to_text()
    assert "3 schedules, reference with 14 arcs" in text
    assert report.to_tsv().count("\n") == 1 + 3 + 4


def test_report_without_reference():
    table = random_table(1, 3, 2)
    q = assemble(table, 2)
    report = campaign_report([SampleSet.aggregate(q, np.zeros((1, q.size)))], q)
    assert [k for k, _ in report.aggregates()] == ["instances with cycles"]
    with pytest.raises(ValueError):
        campaign_report([], q)


# -------------------------------------------------------------------- DOT


def test_dot_empty_two_nodes():
    text = to_dot(Dag.empty(2, ("A", "B")))
    assert text.count(";") == 2 and "->" not in text


def test_dot_chain():
    text = to_dot(Dag(("A", "B"), frozenset({(0, 1)})))
    assert [line for line in text.splitlines() if "->" in line] == ["  A -> B;"]


def test_dot_reference():
    text = to_dot(raf_reference())
    assert text.count("->") == 14
    assert sum(1 for line in text.splitlines() if line.strip().endswith(";") and "->" not in line) == 8


def test_dot_quotes_odd_names():
    assert '"p 38"' in to_dot(Dag.empty(1, ("p 38",)))


# -------------------------------------------------------------------- DAG


def test_arc_file_roundtrip():
    ref = raf_reference()
    assert parse_arcs(format_arcs(ref), ref.names) == ref


def test_parse_arcs_errors():
    with pytest.raises(ValueError):
        parse_arcs("A -> Z\n", ("A", "B"))
    with pytest.raises(ValueError):
        parse_arcs("A => B\n", ("A", "B"))


def test_topological_order_and_cycles():
    dag = Dag(("a", "b", "c"), frozenset({(2, 0), (0, 1)}))
    assert dag.topological_order() == [2, 0, 1]
    with pytest.raises(CycleError):
        Dag(("a", "b"), frozenset({(0, 1), (1, 0)})).topological_order()
    with pytest.raises(ValueError):
        Dag(("a",), frozenset({(0, 0)}))


def _reachable_cycle(adj: np.ndarray) -> bool:
    """Floyd-Warshall transitive closure; a cycle puts a node on its own path."""
    reach = adj.astype(bool).copy()
    n = len(adj)
    for k in range(n):
        reach |= reach[:, k : k + 1] & reach[k : k + 1, :]
    return bool(reach.diagonal().any())


def test_cycle_detection_matches_path_existence():
    gen = np.random.default_rng(8)
    for _ in range(300):
        n = int(gen.integers(2, 9))
        adj = (gen.random((n, n)) < gen.uniform(0.05, 0.3)).astype(int)
        np.fill_diagonal(adj, 0)
        dag = Dag(tuple(f"v{i}" for i in range(n)), frozenset(zip(*map(lambda a: a.tolist(), np.nonzero(adj)))))
        assert dag.has_cycle() == _reachable_cycle(adj)


@settings(max_examples=40, deadline=None)
@given(bits=st.lists(st.booleans(), min_size=56, max_size=56))
def test_metrics_conservation(bits):
    ref = raf_reference()
    pairs = [(a, b) for a in range(8) for b in range(8) if a != b]
    cand = Dag(ref.names, frozenset(p for p, b in zip(pairs, bits) if b))
    m = metrics(cand, ref)
    assert m.true_positives + m.false_negatives == 14
    assert m.true_positives + m.false_positives == len(cand.arcs)
