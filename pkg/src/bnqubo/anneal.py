"""QUBO solvers: simulated annealing, exhaustive enumeration, gauge campaigns."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._core import get_backend
from .qubo import Qubo
from .seeding import derive_seed, rng as labeled_rng

MAX_EXHAUSTIVE = 26


@dataclass(frozen=True)
class Schedule:
    """Geometric inverse-temperature ramp, one beta per sweep."""

    sweeps: int
    beta_hot: float
    beta_cold: float

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("a schedule needs at least one sweep")
        if not 0 < self.beta_hot < self.beta_cold:
            raise ValueError("need 0 < beta_hot < beta_cold")

    def betas(self) -> np.ndarray:
        if self.sweeps == 1:
            return np.array([self.beta_cold])
        return np.geomspace(self.beta_hot, self.beta_cold, self.sweeps)


@dataclass(eq=False)
class SampleSet:
    """Distinct reads sorted by energy, then assignment, then gauge tag."""

    samples: np.ndarray  # (k, n) uint8
    energies: np.ndarray
    occurrences: np.ndarray
    tags: np.ndarray  # gauge id per record

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def num_reads(self) -> int:
        return int(self.occurrences.sum())

    def first(self):
        return self.samples[0], float(self.energies[0])

    def records(self):
        for x, e, c, t in zip(self.samples, self.energies, self.occurrences, self.tags):
            yield x, float(e), int(c), int(t)

    @classmethod
    def aggregate(cls, qubo: Qubo, X: np.ndarray, tags=None, counts=None) -> "SampleSet":
        X = np.ascontiguousarray(X, dtype=np.uint8)
        if X.ndim != 2 or X.shape[1] != qubo.size:
            raise ValueError("samples do not match the registry size")
        tags = np.zeros(len(X), dtype=np.int64) if tags is None else np.asarray(tags, dtype=np.int64)
        counts = np.ones(len(X), dtype=np.int64) if counts is None else np.asarray(counts, dtype=np.int64)
        keyed = np.concatenate([X.astype(np.int64), tags[:, None]], axis=1)
        if len(X):
            uniq, inverse = np.unique(keyed, axis=0, return_inverse=True)
            occ = np.bincount(inverse.ravel(), weights=counts, minlength=len(uniq)).astype(np.int64)
        else:
            uniq, occ = keyed, np.zeros(0, dtype=np.int64)
        samples = uniq[:, :-1].astype(np.uint8)
        utags = uniq[:, -1]
        energies = np.array([qubo.energy(x) for x in samples], dtype=np.float64)
        keys = [utags] + [samples[:, c] for c in range(samples.shape[1] - 1, -1, -1)] + [energies]
        order = np.lexsort(keys) if len(samples) else np.zeros(0, dtype=np.int64)
        return cls(samples[order], energies[order], occ[order], utags[order])

    @classmethod
    def merge(cls, qubo: Qubo, sets: Sequence["SampleSet"]) -> "SampleSet":
        return cls.aggregate(
            qubo,
            np.concatenate([s.samples for s in sets]),
            np.concatenate([s.tags for s in sets]),
            np.concatenate([s.occurrences for s in sets]),
        )


def energy(qubo: Qubo, x) -> float:
    return qubo.energy(x)


def auto_schedule(qubo: Qubo, sweeps: int = 1000) -> Schedule:
    """Hot end accepts the largest possible uphill flip with probability 1/2,
    cold end accepts the smallest with probability 1/100.

    The largest flip cost of a variable is its largest attainable local-field
    magnitude, ``max(|h + sum J+|, |h + sum J-|)``; the smallest is the
    smallest nonzero coefficient magnitude.
    """
    indptr, _, data, h = qubo.csr
    rows = np.repeat(np.arange(len(h)), np.diff(indptr))
    pos = h.copy()
    neg = h.copy()
    np.add.at(pos, rows, np.where(data > 0, data, 0.0))
    np.add.at(neg, rows, np.where(data < 0, data, 0.0))
    de_max = float(np.max(np.maximum(np.abs(pos), np.abs(neg)))) if len(h) else 0.0
    coeffs = np.abs(np.concatenate([h, data]))
    coeffs = coeffs[coeffs > 1e-12 * max(de_max, float(coeffs.max(initial=0.0)))]
    if de_max == 0.0 or coeffs.size == 0:
        raise ValueError("nothing to optimize: all coefficients are zero")
    de_min = float(coeffs.min())
    return Schedule(int(sweeps), math.log(2.0) / de_max, math.log(100.0) / min(de_min, de_max))


def default_schedules(qubo: Qubo, count: int = 30, min_sweeps: int = 1000, max_sweeps: int = 10_000) -> list[Schedule]:
    sweeps = np.round(np.geomspace(min_sweeps, max_sweeps, count)).astype(int) if count > 1 else [max_sweeps]
    return [auto_schedule(qubo, int(s)) for s in sweeps]


def solve_sa(
    qubo: Qubo,
    sched: Schedule,
    reads: int,
    seed: int,
    *,
    read_offset: int = 0,
    backend=None,
    threads: int = 1,
) -> SampleSet:
    """Independent annealing restarts; read ``k`` is seeded from ``(seed, k)``."""
    X = sa_reads(qubo, sched, reads, seed, read_offset=read_offset, backend=backend, threads=threads)
    return SampleSet.aggregate(qubo, X)


def sa_reads(qubo, sched, reads, seed, *, read_offset=0, backend=None, threads=1) -> np.ndarray:
    """Raw final states, one row per read, in read order."""
    if reads < 1:
        raise ValueError("need at least one read")
    kern = get_backend(backend) if backend is None or isinstance(backend, str) else backend
    indptr, indices, data, h = qubo.csr
    # closing zero-temperature sweep: every read ends in a single-flip local minimum
    betas = np.append(sched.betas(), np.inf)
    seeds = np.array([derive_seed(seed, "read", read_offset + k) for k in range(reads)], dtype=np.uint64)
    out = np.zeros((reads, qubo.size), dtype=np.uint8)
    threads = max(1, min(int(threads), reads))
    if threads == 1:
        kern.anneal(indptr, indices, data, h, betas, seeds, out)
    else:
        bounds = np.linspace(0, reads, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            jobs = [
                pool.submit(kern.anneal, indptr, indices, data, h, betas, seeds[a:b], out[a:b])
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            for job in jobs:
                job.result()
    return out


def solve_exhaustive(qubo: Qubo, k: int | None = None, *, backend=None) -> SampleSet:
    """Enumerate all assignments; keep the best ``k`` (all when ``None``)."""
    n = qubo.size
    if n > MAX_EXHAUSTIVE:
        raise ValueError(f"{n} variables exceeds the exhaustive limit of {MAX_EXHAUSTIVE}")
    kern = get_backend(backend) if backend is None or isinstance(backend, str) else backend
    indptr, indices, data, h = qubo.csr
    approx = kern.exhaustive_energies(indptr, indices, data, h, float(qubo.offset))
    if k is None or k >= len(approx):
        cand = np.arange(len(approx), dtype=np.int64)
    else:
        scale = abs(qubo.offset) + float(np.abs(h).sum() + np.abs(data).sum())
        kth = np.partition(approx, k - 1)[k - 1]
        cand = np.flatnonzero(approx <= kth + 1e-9 * max(scale, 1.0)).astype(np.int64)
    X = ((cand[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.uint8)
    result = SampleSet.aggregate(qubo, X)
    if k is not None and k < len(result):
        result = SampleSet(result.samples[:k], result.energies[:k], result.occurrences[:k], result.tags[:k])
    return result


# ------------------------------------------------------------------- gauges


@dataclass(frozen=True, eq=False)
class Gauge:
    flips: np.ndarray  # +1 / -1 per variable

    @classmethod
    def identity(cls, n: int) -> "Gauge":
        return cls(np.ones(n, dtype=np.int8))

    @classmethod
    def random(cls, n: int, gen: np.random.Generator) -> "Gauge":
        return cls(np.where(gen.random(n) < 0.5, -1, 1).astype(np.int8))

    def is_identity(self) -> bool:
        return bool(np.all(self.flips == 1))


def to_ising(qubo: Qubo):
    """Return ``(const, fields, couplings)`` with spins ``s = 2x - 1``."""
    fields: dict[int, float] = {}
    couplings: dict[tuple[int, int], float] = {}
    const = qubo.offset
    for v, c in qubo.linear.items():
        const += c / 2
        fields[v] = fields.get(v, 0.0) + c / 2
    for (u, v), c in qubo.quadratic.items():
        const += c / 4
        fields[u] = fields.get(u, 0.0) + c / 4
        fields[v] = fields.get(v, 0.0) + c / 4
        couplings[(u, v)] = c / 4
    return const, fields, couplings


def from_ising(registry, const, fields, couplings) -> Qubo:
    q = Qubo(registry)
    offset = const
    lin: dict[int, float] = {}
    for v, a in fields.items():
        offset -= a
        lin[v] = lin.get(v, 0.0) + 2 * a
    for (u, v), b in couplings.items():
        offset += b
        lin[u] = lin.get(u, 0.0) - 2 * b
        lin[v] = lin.get(v, 0.0) - 2 * b
        if b != 0.0:
            q.quadratic[(u, v)] = 4 * b
    q.linear = {v: c for v, c in sorted(lin.items()) if c != 0.0}
    q.offset = offset
    return q


def apply_gauge(qubo: Qubo, g: Gauge) -> Qubo:
    """Spin-reversal transform: ``energy(q, x) == energy(apply_gauge(q, g), ungauge(x, g))``."""
    if len(g.flips) != qubo.size:
        raise ValueError("gauge length does not match the registry size")
    if g.is_identity():
        return qubo.with_registry(qubo.registry)
    const, fields, couplings = to_ising(qubo)
    f = g.flips
    fields = {v: a * f[v] for v, a in sorted(fields.items())}
    couplings = {(u, v): b * f[u] * f[v] for (u, v), b in sorted(couplings.items())}
    return from_ising(qubo.registry, const, fields, couplings)


def ungauge(x, g: Gauge) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if x.shape[-1] != len(g.flips):
        raise ValueError("gauge length does not match the assignment length")
    return np.where(g.flips == -1, 1 - x, x).astype(np.uint8)


def campaign_gauges(n: int, gauges_per: int, seed: int, schedule_id: int) -> list[Gauge]:
    """Gauge 0 is the identity; the rest are drawn from labeled streams."""
    out = [Gauge.identity(n)]
    for g in range(1, gauges_per):
        out.append(Gauge.random(n, labeled_rng(seed, "gauge", schedule_id, g)))
    return out


def schedule_seed(seed: int, schedule_id: int) -> int:
    return derive_seed(seed, "schedule", schedule_id)


def run_campaign(
    qubo: Qubo,
    schedules: Sequence[Schedule],
    reads_per: int,
    gauges_per: int,
    seed: int,
    *,
    backend=None,
    threads: int = 1,
) -> list[SampleSet]:
    """One merged SampleSet per schedule; reads split evenly over the gauges."""
    if not schedules:
        raise ValueError("need at least one schedule")
    if gauges_per < 1 or reads_per < gauges_per:
        raise ValueError(f"{reads_per} reads cannot be split over {gauges_per} gauges")
    results = []
    base, extra = divmod(reads_per, gauges_per)
    for s, sched in enumerate(schedules):
        sseed = schedule_seed(seed, s)
        offset = 0
        chunks, tags = [], []
        for gi, gauge in enumerate(campaign_gauges(qubo.size, gauges_per, seed, s)):
            count = base + (1 if gi < extra else 0)
            gauged = apply_gauge(qubo, gauge)
            X = sa_reads(gauged, sched, count, sseed, read_offset=offset, backend=backend, threads=threads)
            chunks.append(ungauge(X, gauge))
            tags.append(np.full(count, gi))
            offset += count
        results.append(SampleSet.aggregate(qubo, np.concatenate(chunks), np.concatenate(tags)))
    return results
