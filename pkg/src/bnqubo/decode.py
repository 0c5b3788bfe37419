"""Turn solver assignments back into graphs and score them against a reference."""

from __future__ import annotations

import io
import re
import statistics
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations
from typing import Sequence

import numpy as np

from .dag import Dag, parse_arcs
from .qubo import Qubo, VarRegistry

RAF_NODES = ("PKC", "PKA", "RAF", "MEK", "ERK", "AKT", "P38", "JNK")


@dataclass(frozen=True)
class Candidate:
    graph: Dag
    order_bits: dict[tuple[int, int], int]
    slack: tuple[int, ...]  # integer slack value per node
    ancilla_bits: tuple[int, ...]
    energy: float | None = None


@dataclass(frozen=True)
class Diagnostics:
    has_cycle: bool
    cap_violations: tuple[int, ...]  # nodes whose in-degree exceeds the cap
    consistency_violations: int
    transitivity_violations: int
    slack_mismatches: int  # nodes with m - indeg - slack != 0

    @property
    def clean(self) -> bool:
        return not (
            self.has_cycle
            or self.cap_violations
            or self.consistency_violations
            or self.transitivity_violations
            or self.slack_mismatches
        )


@dataclass(frozen=True)
class Metrics:
    true_positives: int
    false_positives: int
    false_negatives: int
    has_cycle: bool
    consistency_violations: int
    parent_cap_violations: int


def decode(x, reg: VarRegistry, qubo: Qubo | None = None) -> Candidate:
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (reg.size,):
        raise ValueError(f"assignment has length {x.size}, registry has {reg.size} variables")
    n = reg.n
    arcs = frozenset((i, j) for i in range(n) for j in range(n) if i != j and x[reg.d(i, j)])
    order = {(i, j): int(x[reg.r(i, j)]) for i, j in combinations(range(n), 2)}
    slack = tuple(sum(int(x[reg.y(i, l)]) << l for l in range(reg.mu)) for i in range(n))
    anc = tuple(int(v) for v in x[reg.ancilla_base :])
    e = qubo.energy(x) if qubo is not None else None
    return Candidate(Dag(reg.names, arcs), order, slack, anc, e)


def validate(c: Candidate, m: int | Sequence[int]) -> Diagnostics:
    g = c.graph
    caps = (m,) * g.n if isinstance(m, (int, np.integer)) else tuple(m)
    indeg = g.indegrees()
    over = tuple(i for i in range(g.n) if indeg[i] > caps[i])
    consist = 0
    for (i, j), r in c.order_bits.items():
        if ((j, i) in g.arcs and r == 1) or ((i, j) in g.arcs and r == 0):
            consist += 1
    trans = 0
    r = c.order_bits
    for i, j, k in combinations(range(g.n), 3):
        a, b, ac = r[(i, j)], r[(j, k)], r[(i, k)]
        if (a and b and not ac) or (not a and not b and ac):
            trans += 1
    mismatch = sum(1 for i in range(g.n) if caps[i] - indeg[i] - c.slack[i] != 0)
    return Diagnostics(g.has_cycle(), over, consist, trans, mismatch)


def metrics(c: Candidate | Dag, reference: Dag, m=None, *, skeleton: bool = False) -> Metrics:
    """Orientation-exact arc counts (``skeleton=True`` ignores direction)."""
    g = c.graph if isinstance(c, Candidate) else c
    if g.names != reference.names:
        raise ValueError("candidate and reference have different node sets")
    if skeleton:
        cand = {frozenset(a) for a in g.arcs}
        ref = {frozenset(a) for a in reference.arcs}
    else:
        cand, ref = set(g.arcs), set(reference.arcs)
    tp = len(cand & ref)
    fp = len(cand - ref)
    fn = len(ref - cand)
    if isinstance(c, Candidate) and m is not None:
        diag = validate(c, m)
        consist, cap = diag.consistency_violations, len(diag.cap_violations)
    else:
        consist, cap = 0, 0
    return Metrics(tp, fp, fn, g.has_cycle(), consist, cap)


# ------------------------------------------------------------------ reports


@dataclass
class ScheduleRow:
    schedule: int
    sweeps: int | None
    energy: float
    reads_at_best: int
    candidate: Candidate
    diagnostics: Diagnostics
    metrics: Metrics | None
    score: float | None = None


@dataclass
class CampaignReport:
    rows: list[ScheduleRow]
    reference_arcs: int | None
    extra: dict = field(default_factory=dict)

    @property
    def cycles(self) -> int:
        return sum(1 for r in self.rows if r.diagnostics.has_cycle)

    def _tp(self):
        return [r.metrics.true_positives for r in self.rows if r.metrics]

    def _fp(self):
        return [r.metrics.false_positives for r in self.rows if r.metrics]

    @property
    def fp_range(self) -> tuple[int, int] | None:
        fp = self._fp()
        return (min(fp), max(fp)) if fp else None

    @property
    def mean_tp(self) -> float | None:
        tp = self._tp()
        return statistics.fmean(tp) if tp else None

    @property
    def median_tp(self) -> float | None:
        tp = self._tp()
        return statistics.median(tp) if tp else None

    def aggregates(self) -> list[tuple[str, str]]:
        rows = [("instances with cycles", str(self.cycles))]
        if self.reference_arcs is not None:
            lo, hi = self.fp_range
            rows += [
                ("false positives", f"{lo}-{hi}"),
                ("average true positives", f"{self.mean_tp:.1f}"),
                ("median true positives", _num(self.median_tp)),
            ]
        return rows

    def to_tsv(self) -> str:
        out = io.StringIO()
        out.write("schedule\tsweeps\tbest_energy\treads_at_best\tacyclic\tconsistency_violations\t"
                  "cap_violations\tn_arcs\tscore\ttp\tfp\tfn\n")
        for r in self.rows:
            m = r.metrics
            out.write(
                "\t".join(
                    [
                        str(r.schedule),
                        "" if r.sweeps is None else str(r.sweeps),
                        f"{r.energy:.12g}",
                        str(r.reads_at_best),
                        "1" if not r.diagnostics.has_cycle else "0",
                        str(r.diagnostics.consistency_violations),
                        str(len(r.diagnostics.cap_violations)),
                        str(len(r.candidate.graph.arcs)),
                        "" if r.score is None else f"{r.score:.12g}",
                        "" if m is None else str(m.true_positives),
                        "" if m is None else str(m.false_positives),
                        "" if m is None else str(m.false_negatives),
                    ]
                )
                + "\n"
            )
        for key, value in self.aggregates():
            out.write(f"# {key}\t{value}\n")
        for key, value in self.extra.items():
            out.write(f"# {key}\t{value}\n")
        return out.getvalue()

    def to_text(self) -> str:
        pairs = self.aggregates() + [(k, str(v)) for k, v in self.extra.items()]
        width = max(len(k) for k, _ in pairs)
        title = f"{len(self.rows)} schedules"
        if self.reference_arcs is not None:
            title += f", reference with {self.reference_arcs} arcs"
        lines = [title, "-" * len(title)]
        lines += [f"{k.ljust(width)}  {v}" for k, v in pairs]
        return "\n".join(lines) + "\n"


def _num(v) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:.1f}"


def campaign_report(
    samplesets,
    qubo: Qubo,
    reference: Dag | None = None,
    schedules=None,
    table=None,
) -> CampaignReport:
    if not samplesets:
        raise ValueError("no sample sets to report on")
    from .score import network_score

    reg = qubo.registry
    rows = []
    for s, ss in enumerate(samplesets):
        x, e = ss.first()
        at_best = int(ss.occurrences[np.all(ss.samples == x, axis=1)].sum())
        cand = decode(x, reg, qubo)
        diag = validate(cand, reg.m)
        met = metrics(cand, reference, reg.m) if reference is not None else None
        score = None
        if table is not None and not diag.has_cycle and not diag.cap_violations:
            score = network_score(table, cand.graph)
        sweeps = schedules[s].sweeps if schedules is not None else None
        rows.append(ScheduleRow(s, sweeps, e, at_best, cand, diag, met, score))
    return CampaignReport(rows, None if reference is None else len(reference.arcs))


def to_dot(dag: Dag, name: str = "bn") -> str:
    lines = [f"digraph {name} {{"]
    lines += [f"  {_dot_id(v)};" for v in dag.names]
    lines += [f"  {_dot_id(dag.names[a])} -> {_dot_id(dag.names[b])};" for a, b in dag.sorted_arcs()]
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_id(name: str) -> str:
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
        return name
    return '"' + name.replace('"', '\\"') + '"'


def raf_reference_text() -> str:
    return resources.files("bnqubo").joinpath("resources/raf8.arcs").read_text()


def raf_reference(names: Sequence[str] | None = None) -> Dag:
    text = raf_reference_text()
    return parse_arcs(text, RAF_NODES if names is None else names)
