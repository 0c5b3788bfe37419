"""Bayesian-Dirichlet local scores and their Möbius (subset) weights.

Scores are negative log marginal likelihoods in nats, so lower is better.
Parent sets are stored as bitmasks over node indices.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .dag import Dag
from .data import CountTable, Dataset, tabulate_counts


@dataclass(frozen=True)
class PriorScheme:
    kind: str = "K2"
    ess: float = 1.0

    def __post_init__(self):
        if self.kind not in ("K2", "BDeu"):
            raise ValueError(f"unknown prior {self.kind!r}; expected K2 or BDeu")
        if not self.ess > 0:
            raise ValueError("equivalent sample size must be positive")

    def alpha_ijk(self, q: int, r: int) -> float:
        if self.kind == "K2":
            return 1.0
        return self.ess / (q * r)


K2 = PriorScheme("K2")


def mask_of(parents: Iterable[int]) -> int:
    m = 0
    for p in parents:
        m |= 1 << p
    return m


def members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def parent_sets(n: int, node: int, m_max: int) -> list[tuple[int, ...]]:
    """All parent sets of ``node`` with at most ``m_max`` members, by size then lexicographically."""
    others = [v for v in range(n) if v != node]
    return [c for k in range(m_max + 1) for c in combinations(others, k)]


def local_score(counts: CountTable, prior: PriorScheme = K2, alpha: float | None = None) -> float:
    """Negative log BD marginal likelihood of one family, in log-gamma form."""
    a = prior.alpha_ijk(counts.q, counts.r) if alpha is None else alpha
    if not a > 0:
        raise ValueError("Dirichlet hyperparameters must be positive")
    a_ij = a * counts.r
    lg_a, lg_aij = math.lgamma(a), math.lgamma(a_ij)
    terms = []
    for row in counts.n_ijk.tolist():
        n_ij = sum(row)
        if n_ij == 0:
            continue
        terms.append(math.lgamma(n_ij + a_ij) - lg_aij)
        for n in row:
            if n:
                terms.append(lg_a - math.lgamma(n + a))
    return math.fsum(terms)


@dataclass
class LocalScoreTable:
    names: tuple[str, ...]
    m_max: int
    scores: list[dict[int, float]] = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.names)

    def __getitem__(self, key: tuple[int, Iterable[int]]) -> float:
        node, parents = key
        return self.scores[node][mask_of(parents)]

    def __len__(self) -> int:
        return sum(len(s) for s in self.scores)

    def check_complete(self, node: int | None = None) -> None:
        nodes = range(self.n) if node is None else [node]
        for i in nodes:
            for ps in parent_sets(self.n, i, self.m_max):
                if mask_of(ps) not in self.scores[i]:
                    named = ",".join(self.names[p] for p in ps) or "{}"
                    raise ValueError(f"score table incomplete: node {self.names[i]} parents {named}")

    def entries(self):
        """Yield (node, parent tuple, score) in canonical order."""
        for i in range(self.n):
            for ps in parent_sets(self.n, i, self.m_max):
                yield i, ps, self.scores[i][mask_of(ps)]

    def node_range(self, i: int) -> float:
        vals = self.scores[i].values()
        return max(vals) - min(vals)


def score_table(ds: Dataset, m_max: int, prior: PriorScheme = K2, threads: int = 1) -> LocalScoreTable:
    """Every local score with at most ``m_max`` parents; nodes are scored in parallel."""
    n = ds.n
    if n < 2:
        raise ValueError("need at least two variables")
    if m_max < 1:
        raise ValueError("m_max must be at least 1")
    if m_max >= n:
        raise ValueError(f"m_max={m_max} must be below the variable count {n}")

    def node_scores(i: int) -> dict[int, float]:
        return {mask_of(ps): local_score(tabulate_counts(ds, i, ps), prior) for ps in parent_sets(n, i, m_max)}

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            scores = list(pool.map(node_scores, range(n)))
    else:
        scores = [node_scores(i) for i in range(n)]
    return LocalScoreTable(ds.names, m_max, scores)


def network_score(table: LocalScoreTable, dag: Dag) -> float:
    terms = []
    for i, ps in enumerate(dag.parent_sets()):
        if len(ps) > table.m_max:
            raise ValueError(
                f"node {table.names[i]} has {len(ps)} parents, table covers at most {table.m_max}"
            )
        terms.append(table.scores[i][mask_of(ps)])
    return math.fsum(terms)


def mobius_weights(table: LocalScoreTable, node: int) -> dict[int, float]:
    """Inclusion-exclusion weights ``w(J)`` with ``sum_{J' <= J} w(J') = s(J)``."""
    table.check_complete(node)
    s = table.scores[node]
    weights = {}
    for ps in parent_sets(table.n, node, table.m_max):
        terms = []
        for k in range(len(ps) + 1):
            sign = -1.0 if (len(ps) - k) % 2 else 1.0
            terms.extend(sign * s[mask_of(sub)] for sub in combinations(ps, k))
        weights[mask_of(ps)] = math.fsum(terms)
    return weights


def mobius_table(table: LocalScoreTable) -> list[dict[int, float]]:
    return [mobius_weights(table, i) for i in range(table.n)]


def reconstruct(weights: dict[int, float], mask: int) -> float:
    """Sum of weights over all subsets of ``mask`` (inverse transform)."""
    ps = members(mask)
    return math.fsum(weights[mask_of(sub)] for k in range(len(ps) + 1) for sub in combinations(ps, k))


# ----------------------------------------------------------------------- I/O


def write_score_table(table: LocalScoreTable) -> str:
    out = io.StringIO()
    for i, ps, s in table.entries():
        out.write(f"{table.names[i]}\t{','.join(table.names[p] for p in ps)}\t{s:.12g}\n")
    return out.getvalue()


def read_score_table(text: str, names: Sequence[str] | None = None) -> LocalScoreTable:
    rows = []
    order: dict[str, None] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}")
        node, parents, value = parts
        order.setdefault(node, None)
        rows.append((lineno, node, [p for p in parents.split(",") if p], value))
    names = tuple(names) if names is not None else tuple(order)
    lookup = {name: i for i, name in enumerate(names)}
    scores: list[dict[int, float]] = [{} for _ in names]
    m_max = 0
    for lineno, node, parents, value in rows:
        try:
            i = lookup[node]
            mask = mask_of(lookup[p] for p in parents)
        except KeyError as exc:
            raise ValueError(f"line {lineno}: unknown node {exc.args[0]!r}") from None
        try:
            scores[i][mask] = float(value)
        except ValueError:
            raise ValueError(f"line {lineno}: bad score {value!r}") from None
        m_max = max(m_max, len(parents))
    table = LocalScoreTable(names, m_max, scores)
    table.check_complete()
    return table
