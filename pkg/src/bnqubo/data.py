"""Tabular data: CSV ingest, joint discretization, count tables and sampling."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dag import Dag, CycleError
from .seeding import rng as labeled_rng


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class RawTable:
    column_names: tuple[str, ...]
    values: np.ndarray  # (n_rows, n_columns) float64

    def __post_init__(self):
        if len(set(self.column_names)) != len(self.column_names):
            raise ValueError("column names must be unique")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.column_names):
            raise ValueError("values must be a (rows, columns) matrix")
        if self.values.shape[0] == 0:
            raise ValueError("no data rows")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_names.index(name)]


@dataclass(frozen=True)
class Dataset:
    """Discrete observations; ``rows[t, i]`` is the level of variable ``i``."""

    names: tuple[str, ...]
    cardinalities: tuple[int, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        if rows.ndim != 2:
            rows = rows.reshape(-1, len(self.names))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "cardinalities", tuple(int(c) for c in self.cardinalities))
        if len(self.names) != len(self.cardinalities) or rows.shape[1] != len(self.names):
            raise ValueError("names, cardinalities and row width disagree")
        if len(set(self.names)) != len(self.names):
            raise ValueError("variable names must be unique")
        for i, r in enumerate(self.cardinalities):
            if r < 2:
                raise ValueError(f"variable {self.names[i]!r} has cardinality {r} < 2")
            col = rows[:, i]
            if col.size and (col.min() < 0 or col.max() >= r):
                raise ValueError(f"variable {self.names[i]!r} has a level outside [0, {r})")

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class CountTable:
    child: int
    parents: tuple[int, ...]
    r: int
    n_ijk: np.ndarray  # (q, r) int64

    @property
    def q(self) -> int:
        return self.n_ijk.shape[0]

    @property
    def n_ij(self) -> np.ndarray:
        return self.n_ijk.sum(axis=1)


@dataclass(frozen=True)
class CptSet:
    """Per-node conditional tables; row ``j`` is the child distribution given
    joint parent state ``j``."""

    cardinalities: tuple[int, ...]
    tables: tuple[np.ndarray, ...]

    def check(self, dag: Dag) -> None:
        if len(self.tables) != dag.n or len(self.cardinalities) != dag.n:
            raise ValueError("CPT set size does not match the graph")
        for i, parents in enumerate(dag.parent_sets()):
            q = math.prod(self.cardinalities[p] for p in parents)
            if self.tables[i].shape != (q, self.cardinalities[i]):
                raise ValueError(
                    f"node {i}: CPT shape {self.tables[i].shape}, expected {(q, self.cardinalities[i])}"
                )


# ---------------------------------------------------------------- CSV ingest


def load_csv(text: str | io.TextIOBase) -> RawTable:
    """Parse a header row plus numeric comma-separated rows."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or not any(h.strip() for h in header):
        raise ParseError("empty input: missing header")
    header = [h.strip() for h in header]
    seen = set()
    for name in header:
        if not name:
            raise ParseError("header: empty column name")
        if name in seen:
            raise ParseError(f"header: duplicate column name {name!r}")
        seen.add(name)

    width = len(header)
    rows = []
    for rowno, fields in enumerate(reader, start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != width:
            noun = "field" if len(fields) == 1 else "fields"
            raise ParseError(f"row {rowno}: {len(fields)} {noun}, expected {width}")
        parsed = []
        for name, cell in zip(header, fields):
            cell = cell.strip()
            if not cell:
                raise ParseError(f"row {rowno}: missing value in column {name!r}")
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"row {rowno}: non-numeric value {cell!r} in column {name!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"row {rowno}: non-finite value {cell!r} in column {name!r}")
            parsed.append(value)
        rows.append(parsed)
    if not rows:
        raise ParseError("no data rows")
    return RawTable(tuple(header), np.array(rows, dtype=np.float64))


def write_dataset(ds: Dataset) -> tuple[str, str]:
    """Return (level CSV, cardinality sidecar line)."""
    out = io.StringIO()
    out.write(",".join(ds.names) + "\n")
    for row in ds.rows:
        out.write(",".join(str(int(v)) for v in row) + "\n")
    return out.getvalue(), ",".join(str(r) for r in ds.cardinalities) + "\n"


def read_dataset(text: str, cardinality_line: str | None = None) -> Dataset:
    """Read integer levels; without a sidecar, cardinality is ``max level + 1`` (at least 2)."""
    raw = load_csv(text)
    values = raw.values
    if not np.all(values == np.round(values)) or values.min() < 0:
        raise ParseError("dataset cells must be non-negative integers")
    rows = values.astype(np.int64)
    if cardinality_line is None:
        cards = [max(2, int(rows[:, i].max()) + 1) for i in range(rows.shape[1])]
    else:
        parts = [p.strip() for p in cardinality_line.strip().split(",")]
        try:
            cards = [int(p) for p in parts]
        except ValueError:
            raise ParseError(f"cardinality line: non-integer entry in {cardinality_line.strip()!r}") from None
        if len(cards) != len(raw.column_names):
            raise ParseError(
                f"cardinality line has {len(cards)} entries, expected {len(raw.column_names)}"
            )
    try:
        return Dataset(raw.column_names, tuple(cards), rows)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# ------------------------------------------------------------ discretization


def mutual_information(a: np.ndarray, b: np.ndarray, ra: int, rb: int) -> float:
    """Empirical mutual information in nats; empty cells contribute nothing."""
    table = np.bincount(a * rb + b, minlength=ra * rb).reshape(ra, rb)
    return _table_mi(table)


def _table_mi(table: np.ndarray) -> float:
    total = table.sum()
    if total == 0:
        return 0.0
    p = table / total
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / (pa @ pb)[mask])))


def quantile_bins(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-frequency binning by rank; tied values share a bin and empty
    bins are dropped, so labels are consecutive from 0."""
    order = np.sort(values)
    rank = np.searchsorted(order, values, side="left")
    labels = rank * bins // len(values)
    _, compact = np.unique(labels, return_inverse=True)
    return compact.astype(np.int64)


def discretize_hartemink(raw: RawTable, levels: int = 3, initial_bins: int = 12) -> Dataset:
    """Jointly discretize every column to ``levels`` levels.

    Each column starts from ``initial_bins`` quantile intervals.  Passes then
    run round-robin over the columns still above ``levels``; each such column
    merges the adjacent interval pair that keeps the sum of its mutual
    information with all other (currently discretized) columns largest.
    """
    if levels < 2:
        raise ValueError("levels must be at least 2")
    if initial_bins < levels:
        raise ValueError("initial_bins must be at least levels")
    if raw.n_rows < initial_bins:
        raise ValueError(f"{raw.n_rows} rows cannot fill {initial_bins} initial bins")

    codes = []
    for i, name in enumerate(raw.column_names):
        col = raw.values[:, i]
        distinct = np.unique(col).size
        if distinct == 1:
            raise ValueError(f"column {name!r} is constant")
        if distinct < levels:
            raise ValueError(f"column {name!r} has {distinct} distinct values, fewer than {levels} levels")
        c = quantile_bins(col, initial_bins)
        if c.max() + 1 < levels:
            raise ValueError(f"column {name!r} yields only {c.max() + 1} quantile bins")
        codes.append(c)
    cards = [int(c.max()) + 1 for c in codes]
    n = len(codes)

    while any(c > levels for c in cards):
        for i in range(n):
            if cards[i] <= levels:
                continue
            tables = [
                np.bincount(codes[i] * cards[j] + codes[j], minlength=cards[i] * cards[j]).reshape(
                    cards[i], cards[j]
                )
                for j in range(n)
                if j != i
            ]
            best_b, best_mi = 0, -math.inf
            for b in range(cards[i] - 1):
                mi = 0.0
                for t in tables:
                    merged = np.vstack([t[:b], t[b : b + 2].sum(axis=0, keepdims=True), t[b + 2 :]])
                    mi += _table_mi(merged)
                if mi > best_mi + 1e-12 * max(1.0, abs(best_mi)):
                    best_b, best_mi = b, mi
            codes[i] = np.where(codes[i] > best_b, codes[i] - 1, codes[i])
            cards[i] -= 1

    return Dataset(raw.column_names, tuple(cards), np.column_stack(codes))


# ------------------------------------------------------------------ counting


def parent_state_index(rows: np.ndarray, parents: Sequence[int], cards: Sequence[int]) -> np.ndarray:
    """Mixed-radix joint parent state, ascending parent order, first parent most significant."""
    j = np.zeros(rows.shape[0], dtype=np.int64)
    for p in sorted(parents):
        j = j * cards[p] + rows[:, p]
    return j


def tabulate_counts(ds: Dataset, child: int, parents: Sequence[int]) -> CountTable:
    parents = tuple(sorted(int(p) for p in parents))
    if child in parents:
        raise ValueError(f"child {child} cannot be its own parent")
    if len(set(parents)) != len(parents):
        raise ValueError("repeated parent index")
    r = ds.cardinalities[child]
    q = math.prod(ds.cardinalities[p] for p in parents)
    j = parent_state_index(ds.rows, parents, ds.cardinalities)
    flat = np.bincount(j * r + ds.rows[:, child], minlength=q * r)
    return CountTable(child, parents, r, flat.reshape(q, r).astype(np.int64))


# ------------------------------------------------------------------ sampling


def random_cpts(dag: Dag, cardinalities: Sequence[int], concentration: float, seed: int) -> CptSet:
    """Draw every CPT row from a symmetric Dirichlet."""
    gen = labeled_rng(seed, "cpts")
    tables = []
    for i, parents in enumerate(dag.parent_sets()):
        q = math.prod(cardinalities[p] for p in parents)
        rows = gen.dirichlet([concentration] * cardinalities[i], size=q)
        tables.append(rows / rows.sum(axis=1, keepdims=True))
    return CptSet(tuple(int(c) for c in cardinalities), tuple(tables))


def forward_sample(dag: Dag, cpts: CptSet, n: int, seed: int) -> Dataset:
    """Ancestral sampling in topological order."""
    try:
        order = dag.topological_order()
    except CycleError:
        raise CycleError("cannot sample from a cyclic graph") from None
    cpts.check(dag)
    gen = labeled_rng(seed, "forward_sample")
    rows = np.zeros((n, dag.n), dtype=np.int64)
    parent_sets = dag.parent_sets()
    for i in order:
        theta = cpts.tables[i]
        cum = np.cumsum(theta, axis=1)
        j = parent_state_index(rows, parent_sets[i], cpts.cardinalities)
        u = gen.random(n)
        state = (u[:, None] >= cum[j]).sum(axis=1)
        rows[:, i] = np.minimum(state, cpts.cardinalities[i] - 1)
    return Dataset(dag.names, cpts.cardinalities, rows)


def estimate_cpts(dag: Dag, ds: Dataset, alpha=None) -> CptSet:
    """Posterior-mean CPTs under ``alpha`` (a PriorScheme); ``None`` gives
    maximum likelihood with unobserved parent states set uniform."""
    if dag.has_cycle():
        raise CycleError("cannot estimate CPTs for a cyclic graph")
    if dag.n != ds.n:
        raise ValueError("graph and dataset have different variable counts")
    tables = []
    for i, parents in enumerate(dag.parent_sets()):
        ct = tabulate_counts(ds, i, parents)
        counts = ct.n_ijk.astype(np.float64)
        if alpha is None:
            totals = counts.sum(axis=1, keepdims=True)
            theta = np.where(totals > 0, counts / np.where(totals > 0, totals, 1.0), 1.0 / ct.r)
        else:
            a = alpha.alpha_ijk(ct.q, ct.r)
            theta = (counts + a) / (counts.sum(axis=1, keepdims=True) + a * ct.r)
        theta = theta / theta.sum(axis=1, keepdims=True)
        tables.append(theta)
    return CptSet(ds.cardinalities, tuple(tables))
