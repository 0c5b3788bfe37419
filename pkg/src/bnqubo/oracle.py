"""Exact structure learning, used to certify annealer output.

``exact_learn`` is the usual two-stage subset dynamic programme: best parent
set within every candidate-predecessor set, then the best sink ordering.
``enumerate_dags`` is a brute-force cross-check for very small graphs.
"""

from __future__ import annotations

from itertools import product

from .dag import Dag, default_names
from .score import LocalScoreTable, members, network_score

MAX_DP_NODES = 20
MAX_ENUM_NODES = 4


def best_parent_cache(table: LocalScoreTable, node: int, m: int | None = None) -> dict[int, tuple[float, tuple[int, ...]]]:
    """Map each predecessor mask ``S`` (bit ``node`` clear) to the best
    ``(score, parents)`` with ``parents <= S`` and at most ``m`` members."""
    m = table.m_max if m is None else min(m, table.m_max)
    n = table.n
    scores = table.scores[node]
    bit = 1 << node
    cache: dict[int, tuple[float, tuple[int, ...]]] = {}
    for S in range(1 << n):
        if S & bit:
            continue
        ps = members(S)
        best = (scores[S], ps) if len(ps) <= m else None
        for v in ps:
            cand = cache[S & ~(1 << v)]
            if best is None or cand < best:
                best = cand
        cache[S] = best
    return cache


def exact_learn(table: LocalScoreTable, m: int | None = None) -> tuple[Dag, float]:
    """Minimum-score DAG with at most ``m`` parents per node.

    Ties go to the lowest-index sink, then the lexicographically smallest
    parent set.
    """
    n = table.n
    if n > MAX_DP_NODES:
        raise ValueError(f"{n} nodes exceeds the exact-learning limit of {MAX_DP_NODES}")
    caches = [best_parent_cache(table, i, m) for i in range(n)]
    full = (1 << n) - 1
    best = [0.0] * (1 << n)
    sink = [-1] * (1 << n)
    for U in range(1, 1 << n):
        value, choice = None, -1
        for v in members(U):
            rest = U & ~(1 << v)
            cand = best[rest] + caches[v][rest][0]
            if value is None or cand < value:
                value, choice = cand, v
        best[U], sink[U] = value, choice
    parents: list[tuple[int, ...]] = [()] * n
    U = full
    while U:
        v = sink[U]
        U &= ~(1 << v)
        parents[v] = caches[v][U][1]
    dag = Dag.from_parents(parents, table.names)
    return dag, network_score(table, dag)


def iter_dags(n: int, m: int):
    """Every labeled DAG on ``n`` nodes with in-degree at most ``m``."""
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for bits in product((0, 1), repeat=len(pairs)):
        arcs = frozenset(p for p, b in zip(pairs, bits) if b)
        dag = Dag(default_names(n), arcs)
        if max(dag.indegrees(), default=0) > m or dag.has_cycle():
            continue
        yield dag


def enumerate_dags(n: int, m: int, table: LocalScoreTable) -> tuple[Dag, float]:
    if n > MAX_ENUM_NODES:
        raise ValueError(f"{n} nodes exceeds the enumeration limit of {MAX_ENUM_NODES}")
    if n != table.n:
        raise ValueError("node count does not match the score table")
    cap = min(m, table.m_max)
    best_key, best_dag = None, None
    for dag in iter_dags(n, cap):
        dag = Dag(table.names, dag.arcs)
        key = (network_score(table, dag), dag.sorted_arcs())
        if best_key is None or key < best_key:
            best_key, best_dag = key, dag
    return best_dag, best_key[0]


def empty_score(table: LocalScoreTable) -> float:
    return network_score(table, Dag.empty(table.n, table.names))


def relative_gap(table: LocalScoreTable, score: float, optimum: float) -> float:
    """Excess over the optimum as a fraction of the empty-graph-to-optimum range."""
    span = empty_score(table) - optimum
    return (score - optimum) / span if span > 0 else (0.0 if score == optimum else float("inf"))

