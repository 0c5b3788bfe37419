"""Compile a local-score table into a QUBO.

The total objective is the sum of four pseudo-Boolean blocks over one
variable registry:

* score     -- Möbius weights as monomials over incoming-arc bits,
* max       -- squared slack penalty capping each node's in-degree,
* cycle     -- transitivity of the order bits plus arc/order consistency,
* reduction -- ancilla gadgets that replace cubic score monomials.

Variables are laid out as arc bits ``d(i,j)`` for ordered pairs (row-major),
order bits ``r(i,j)`` for ``i<j`` (``1`` means ``i`` precedes ``j``), slack bits
``y(i,l)`` worth ``2**l``, then ancillas in creation order.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .dag import CycleError, Dag
from .score import LocalScoreTable, members, mobius_table

Poly = dict  # sorted variable tuple -> coefficient


@dataclass(frozen=True)
class VarRegistry:
    names: tuple[str, ...]
    m: tuple[int, ...]
    ancillas: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        if len(self.m) != len(self.names):
            raise ValueError("need one parent cap per node")
        if min(self.m, default=1) < 1:
            raise ValueError("parent cap must be at least 1")

    @classmethod
    def create(cls, names: Sequence[str], m: int | Sequence[int]) -> "VarRegistry":
        caps = (m,) * len(names) if isinstance(m, (int, np.integer)) else tuple(m)
        return cls(tuple(names), caps)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def mu(self) -> int:
        return max(1, math.ceil(math.log2(max(self.m) + 1)))

    @property
    def n_arc(self) -> int:
        return self.n * (self.n - 1)

    @property
    def n_order(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def ancilla_base(self) -> int:
        return self.n_arc + self.n_order + self.n * self.mu

    @property
    def size(self) -> int:
        return self.ancilla_base + len(self.ancillas)

    def d(self, i: int, j: int) -> int:
        if i == j:
            raise ValueError("no arc variable for a self-loop")
        return i * (self.n - 1) + (j if j < i else j - 1)

    def r(self, i: int, j: int) -> int:
        if not i < j:
            raise ValueError("order bits exist only for i < j")
        # pairs before row i: sum_{a<i} (n-1-a)
        return self.n_arc + i * (2 * self.n - i - 1) // 2 + (j - i - 1)

    def y(self, i: int, l: int) -> int:
        return self.n_arc + self.n_order + i * self.mu + l

    @cached_property
    def _ancilla_index(self) -> dict[tuple[int, int], int]:
        return {pair: self.ancilla_base + k for k, pair in enumerate(self.ancillas)}

    def ancilla(self, u: int, v: int) -> int:
        return self._ancilla_index[(min(u, v), max(u, v))]

    def with_ancilla(self, u: int, v: int) -> tuple["VarRegistry", int]:
        pair = (min(u, v), max(u, v))
        if pair in self._ancilla_index:
            return self, self._ancilla_index[pair]
        reg = replace(self, ancillas=self.ancillas + (pair,))
        return reg, reg.size - 1

    def role(self, idx: int) -> tuple:
        """``('d', i, j)``, ``('r', i, j)``, ``('y', i, l)`` or ``('z', u, v)``."""
        if not 0 <= idx < self.size:
            raise IndexError(idx)
        if idx < self.n_arc:
            i, rest = divmod(idx, self.n - 1)
            return ("d", i, rest if rest < i else rest + 1)
        if idx < self.n_arc + self.n_order:
            k = idx - self.n_arc
            for i in range(self.n):
                row = self.n - 1 - i
                if k < row:
                    return ("r", i, i + 1 + k)
                k -= row
        if idx < self.ancilla_base:
            i, l = divmod(idx - self.n_arc - self.n_order, self.mu)
            return ("y", i, l)
        return ("z",) + self.ancillas[idx - self.ancilla_base]

    def label(self, idx: int) -> str:
        kind, a, b = self.role(idx)
        nm = self.names
        if kind in ("d", "r"):
            return f"{kind}({nm[a]},{nm[b]})"
        if kind == "y":
            return f"y({nm[a]},{b})"
        ra, rb = self.role(a), self.role(b)
        if ra[0] == rb[0] == "d" and ra[2] == rb[2]:
            return f"ancilla({nm[ra[2]]},{{{nm[ra[1]]},{nm[rb[1]]}}})"
        return f"ancilla(#{a},#{b})"


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty strengths.

    ``delta_max`` may be one value or one per node, ``delta_trans`` one value
    or a map over triples ``(i, j, k)`` with ``i<j<k``, ``delta_consist`` one
    value or a map over pairs ``(i, j)`` with ``i<j``.
    """

    delta_max: float | tuple[float, ...]
    delta_trans: float | Mapping[tuple[int, int, int], float]
    delta_consist: float | Mapping[tuple[int, int], float]
    delta_reduction: float

    def __post_init__(self):
        for v in _values(self.delta_max) + _values(self.delta_trans) + _values(self.delta_consist) + (
            self.delta_reduction,
        ):
            if not v > 0:
                raise ValueError("penalty constants must be strictly positive")

    def node_max(self, i: int) -> float:
        dm = self.delta_max
        return float(dm) if _scalar(dm) else float(dm[i])

    def trans(self, i: int, j: int, k: int) -> float:
        dt = self.delta_trans
        return float(dt) if _scalar(dt) else float(dt[(i, j, k)])

    def consist(self, i: int, j: int) -> float:
        dc = self.delta_consist
        return float(dc) if _scalar(dc) else float(dc[(i, j)])

    def minimum(self) -> float:
        return min(_values(self.delta_max) + _values(self.delta_trans) + _values(self.delta_consist))

    @classmethod
    def uniform(cls, delta: float, reduction: float | None = None) -> "PenaltyConfig":
        return cls(delta, delta, delta, reduction if reduction is not None else delta)


def _scalar(v) -> bool:
    return isinstance(v, (int, float, np.floating, np.integer))


def _values(v) -> tuple[float, ...]:
    if _scalar(v):
        return (float(v),)
    if isinstance(v, Mapping):
        return tuple(float(x) for x in v.values())
    return tuple(float(x) for x in v)


@dataclass(eq=False)
class Qubo:
    """``energy(x) = offset + sum linear[v] x_v + sum quadratic[u,v] x_u x_v``."""

    registry: VarRegistry
    linear: dict[int, float] = field(default_factory=dict)
    quadratic: dict[tuple[int, int], float] = field(default_factory=dict)
    offset: float = 0.0

    @property
    def size(self) -> int:
        return self.registry.size

    @cached_property
    def arrays(self):
        lin = sorted(self.linear.items())
        quad = sorted(self.quadratic.items())
        return (
            np.array([k for k, _ in lin], dtype=np.int64),
            np.array([c for _, c in lin], dtype=np.float64),
            np.array([k[0] for k, _ in quad], dtype=np.int64),
            np.array([k[1] for k, _ in quad], dtype=np.int64),
            np.array([c for _, c in quad], dtype=np.float64),
        )

    @cached_property
    def csr(self):
        """Symmetric adjacency ``(indptr, indices, data, h)`` for the solvers."""
        n = self.size
        h = np.zeros(n, dtype=np.float64)
        for v, c in self.linear.items():
            h[v] = c
        nbrs: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for (u, v), c in sorted(self.quadratic.items()):
            nbrs[u].append((v, c))
            nbrs[v].append((u, c))
        indptr = np.zeros(n + 1, dtype=np.int64)
        for v in range(n):
            nbrs[v].sort()
            indptr[v + 1] = indptr[v] + len(nbrs[v])
        indices = np.array([u for row in nbrs for u, _ in row], dtype=np.int32)
        data = np.array([c for row in nbrs for _, c in row], dtype=np.float64)
        return indptr, indices, data, h

    def energy(self, x) -> float:
        x = np.asarray(x)
        if x.shape != (self.size,):
            raise ValueError(f"assignment has length {x.size}, registry has {self.size} variables")
        li, lc, qu, qv, qc = self.arrays
        xf = x.astype(np.float64)
        return math.fsum(np.concatenate(([self.offset], lc * xf[li], qc * (xf[qu] * xf[qv]))).tolist())

    def energies(self, X: np.ndarray) -> np.ndarray:
        """Vectorized energies for a batch of assignments (rows)."""
        li, lc, qu, qv, qc = self.arrays
        Xf = np.asarray(X, dtype=np.float64)
        return self.offset + Xf[:, li] @ lc + (Xf[:, qu] * Xf[:, qv]) @ qc

    def n_terms(self) -> int:
        return len(self.linear) + len(self.quadratic)

    def with_registry(self, registry: VarRegistry) -> "Qubo":
        return Qubo(registry, dict(self.linear), dict(self.quadratic), self.offset)


# ------------------------------------------------------------ poly helpers


def _add(poly: Poly, key: tuple[int, ...], c: float) -> None:
    if len(set(key)) != len(key):
        raise ValueError(f"repeated variable in monomial {key}")
    key = tuple(sorted(key))
    poly[key] = poly.get(key, 0.0) + c


def poly_value(poly: Mapping[tuple[int, ...], float], x) -> float:
    return math.fsum(c * math.prod(int(x[v]) for v in key) for key, c in poly.items())


def merge_polys(*polys: Poly) -> Poly:
    out: Poly = {}
    for p in polys:
        for key, c in p.items():
            out[key] = out.get(key, 0.0) + c
    return out


def _as_qubo(poly: Poly, reg: VarRegistry) -> Qubo:
    q = Qubo(reg)
    for key in sorted(poly, key=lambda k: (len(k), k)):
        c = poly[key]
        if len(key) == 0:
            q.offset += c
        elif c == 0.0:
            continue
        elif len(key) == 1:
            q.linear[key[0]] = c
        elif len(key) == 2:
            q.quadratic[key] = c
        else:
            raise ValueError(f"degree-{len(key)} monomial left after quadratization")
    return q


# ---------------------------------------------------------------- builders


def build_score_hamiltonian(weights: Sequence[Mapping[int, float]], reg: VarRegistry) -> Poly:
    """One monomial ``w_i(J) * prod_{j in J} d(j,i)`` per nonzero weight."""
    poly: Poly = {(): 0.0}
    for i, w in enumerate(weights):
        for mask in sorted(w, key=lambda mk: (bin(mk).count("1"), members(mk))):
            parents = members(mask)
            if i in parents:
                raise ValueError(f"weight for node {i} lists the node among its own parents")
            c = w[mask]
            if not parents:
                poly[()] += c
            elif c != 0.0:
                _add(poly, tuple(reg.d(j, i) for j in parents), c)
    return poly


def build_max_parent_hamiltonian(reg: VarRegistry, m: int | Sequence[int], pen: PenaltyConfig) -> Poly:
    """Expand ``delta_i * (m_i - indeg_i - slack_i)**2`` per node."""
    caps = reg.m if m is None else ((m,) * reg.n if isinstance(m, (int, np.integer)) else tuple(m))
    poly: Poly = {(): 0.0}
    for i in range(reg.n):
        if caps[i] < 1:
            raise ValueError("parent cap must be at least 1")
        delta = pen.node_max(i)
        terms = [(reg.d(j, i), 1.0) for j in range(reg.n) if j != i]
        terms += [(reg.y(i, l), float(2**l)) for l in range(reg.mu)]
        mi = caps[i]
        poly[()] += delta * mi * mi
        for v, a in terms:
            _add(poly, (v,), delta * (a * a - 2.0 * mi * a))
        for (u, a), (v, b) in combinations(terms, 2):
            _add(poly, (u, v), delta * 2.0 * a * b)
    return poly


def build_cycle_hamiltonian(reg: VarRegistry, pen: PenaltyConfig) -> Poly:
    poly: Poly = {}
    n = reg.n
    for i, j, k in combinations(range(n), 3):
        dt = pen.trans(i, j, k)
        rij, rik, rjk = reg.r(i, j), reg.r(i, k), reg.r(j, k)
        # equals 1 exactly on the two non-transitive assignments
        _add(poly, (rik,), dt)
        _add(poly, (rij, rjk), dt)
        _add(poly, (rij, rik), -dt)
        _add(poly, (rjk, rik), -dt)
    for i, j in combinations(range(n), 2):
        dc = pen.consist(i, j)
        dij, dji, rij = reg.d(i, j), reg.d(j, i), reg.r(i, j)
        # d_ij (1 - r_ij) + d_ji r_ij
        _add(poly, (dij,), dc)
        _add(poly, (dji, rij), dc)
        _add(poly, (dij, rij), -dc)
    return poly


def quadratize(poly: Poly, pen: PenaltyConfig, reg: VarRegistry) -> tuple[Qubo, Poly, Poly]:
    """Replace each cubic ``c x_a x_b x_c`` (``a<b<c``) with ``c z x_c`` plus
    the gadget ``delta (x_a x_b - 2 z x_a - 2 z x_b + 3 z)``.

    One ancilla ``z`` per pair, shared by every cubic term whose two lowest
    variables are that pair.  Returns the QUBO, the substituted polynomial and
    the gadget polynomial (the latter two for block-wise evaluation).
    """
    substituted: Poly = {}
    gadgets: Poly = {}
    dr = pen.delta_reduction
    for key in sorted(poly, key=lambda k: (len(k), k)):
        c = poly[key]
        if len(key) > 3:
            raise ValueError(f"cannot quadratize a degree-{len(key)} term")
        if len(key) < 3:
            substituted[key] = substituted.get(key, 0.0) + c
            continue
        a, b, x3 = key
        fresh = (min(a, b), max(a, b)) not in reg._ancilla_index
        reg, z = reg.with_ancilla(a, b)
        if fresh:
            _add(gadgets, (a, b), dr)
            _add(gadgets, (z, a), -2.0 * dr)
            _add(gadgets, (z, b), -2.0 * dr)
            _add(gadgets, (z,), 3.0 * dr)
        _add(substituted, (z, x3), c)
    return _as_qubo(merge_polys(substituted, gadgets), reg), substituted, gadgets


# ------------------------------------------------------------- calibration


def _caps(table: LocalScoreTable, m) -> tuple[int, ...]:
    m = table.m_max if m is None else m
    return (int(m),) * table.n if isinstance(m, (int, np.integer)) else tuple(int(v) for v in m)


def _shared_cubic_weight(weights, caps) -> float:
    """Largest summed ``|w|`` over cubic terms that share one ancilla."""
    shared: dict[tuple[int, int, int], float] = {}
    for i, w in enumerate(weights):
        if caps[i] < 3:
            continue
        for mask, c in w.items():
            ps = members(mask)
            if len(ps) == 3:
                key = (i, ps[0], ps[1])
                shared[key] = shared.get(key, 0.0) + abs(c)
    return max(shared.values(), default=0.0)


def calibrate_penalties(table: LocalScoreTable, weights=None, m=None) -> PenaltyConfig:
    """One penalty ``1 + sum of per-node score ranges`` for every constraint.

    Any single violation then costs more than the whole attainable score
    improvement.  Constants are rounded up to integers so penalty blocks
    evaluate exactly; the reduction strength also covers every cubic weight
    sharing one ancilla.
    """
    delta = math.ceil(1.0 + math.fsum(table.node_range(i) for i in range(table.n)))
    weights = mobius_table(table) if weights is None else weights
    reduction = math.ceil(1.0 + delta + _shared_cubic_weight(weights, _caps(table, m)))
    return PenaltyConfig(float(delta), float(delta), float(delta), float(reduction))


def arc_gains(table: LocalScoreTable, m=None) -> np.ndarray:
    """``gain[j, i]``: most score lost by dropping parent ``j`` from any
    admissible parent set of ``i`` (clipped at zero)."""
    caps = _caps(table, m)
    n = table.n
    gain = np.zeros((n, n))
    for i in range(n):
        s = table.scores[i]
        for mask, value in s.items():
            ps = members(mask)
            if len(ps) > caps[i]:
                continue
            for j in ps:
                gain[j, i] = max(gain[j, i], s[mask & ~(1 << j)] - value)
    return gain


def _cap_excess_gain(table: LocalScoreTable, weights, i: int, cap: int, exact_limit: int = 12) -> float:
    """Worst ``(best admissible subset score - truncated polynomial) / excess**2``
    over parent sets of ``i`` larger than ``cap``."""
    w = {mask: c for mask, c in weights.items() if bin(mask).count("1") <= cap}
    s = table.scores[i]
    others = [v for v in range(table.n) if v != i]
    if len(others) <= cap:
        return 0.0
    if len(others) > exact_limit:
        base = w.get(0, 0.0) + math.fsum(min(0.0, c) for mask, c in w.items() if mask)
        return max(0.0, max(s.values()) - base)
    worst = 0.0
    for k in range(cap + 1, len(others) + 1):
        for ps in combinations(others, k):
            subsets = [sum(1 << v for v in sub) for kk in range(cap + 1) for sub in combinations(ps, kk)]
            truncated = math.fsum(w[mk] for mk in subsets if mk in w)
            best = min(s[mk] for mk in subsets)
            worst = max(worst, (best - truncated) / (k - cap) ** 2)
    return worst


def tight_penalties(table: LocalScoreTable, m=None, weights=None) -> PenaltyConfig:
    """Per-node, per-pair and per-triple penalties that still make every
    ground state a valid encoding of an optimal DAG.

    Argument: from any violating assignment, (1) trimming each over-cap node
    to its best admissible parent subset lowers energy because the cap
    penalty exceeds the worst truncated-score gain; (2) with caps met,
    resetting the order bits to a score ranking of their tournament and
    dropping the arcs that disagree removes only inconsistent arcs (each
    cheaper than its pair penalty) and backward tournament arcs (each lying
    in a penalized cyclic triple whose penalty exceeds the pair gains it
    covers).  Pair penalties additionally exceed the adjacent cap penalties,
    so a lone inconsistent arc can be dropped by one downhill flip.
    """
    caps = _caps(table, m)
    n = table.n
    weights = mobius_table(table) if weights is None else weights
    gain = arc_gains(table, caps)
    node = tuple(float(math.ceil(1.0 + _cap_excess_gain(table, weights[i], i, caps[i]))) for i in range(n))
    consist = {
        (i, j): float(math.ceil(1.0 + max(gain[i, j], gain[j, i]) + max(node[i], node[j])))
        for i, j in combinations(range(n), 2)
    }
    trans = {
        (i, j, k): float(math.ceil(1.0 + consist[(i, j)] + consist[(i, k)] + consist[(j, k)]))
        for i, j, k in combinations(range(n), 3)
    }
    reduction = float(math.ceil(1.0 + _shared_cubic_weight(weights, caps)))
    return PenaltyConfig(node, trans, consist, reduction)


def resolve_penalties(table: LocalScoreTable, pen, m=None, weights=None) -> PenaltyConfig:
    """``"auto"``/``None`` -> tight, ``"uniform"`` -> single calibrated constant."""
    if isinstance(pen, PenaltyConfig):
        return pen
    if pen in (None, "auto", "tight"):
        return tight_penalties(table, m, weights)
    if pen == "uniform":
        return calibrate_penalties(table, weights, m)
    raise ValueError(f"unknown penalty mode {pen!r}")


# ---------------------------------------------------------------- assembly


@dataclass(eq=False)
class Assembly:
    qubo: Qubo
    penalties: PenaltyConfig
    blocks: dict[str, Qubo]

    def penalty_energy(self, x) -> float:
        return math.fsum(self.blocks[k].energy(x) for k in ("max", "cycle", "reduction"))


def assemble_blocks(
    table: LocalScoreTable,
    m: int | Sequence[int] | None = None,
    pen: PenaltyConfig | str | None = "auto",
) -> Assembly:
    caps = _caps(table, m)
    if max(caps) > 3:
        raise ValueError("parent caps above 3 need degree-4 quadratization, which is unsupported")
    if max(caps) > table.m_max:
        raise ValueError(f"parent cap {max(caps)} exceeds the score table's m_max={table.m_max}")
    weights = mobius_table(table)
    pen = resolve_penalties(table, pen, caps, weights)
    reg = VarRegistry.create(table.names, caps)
    # families above a node's cap can never be complete once the cap holds
    trimmed = [{mask: c for mask, c in w.items() if bin(mask).count("1") <= caps[i]} for i, w in enumerate(weights)]
    score_poly = build_score_hamiltonian(trimmed, reg)
    max_poly = build_max_parent_hamiltonian(reg, caps, pen)
    cycle_poly = build_cycle_hamiltonian(reg, pen)
    _, substituted, gadgets = quadratize(score_poly, pen, reg)
    full, _, _ = quadratize(merge_polys(score_poly, max_poly, cycle_poly), pen, reg)
    reg = full.registry
    blocks = {
        "score": _as_qubo(substituted, reg),
        "max": _as_qubo(max_poly, reg),
        "cycle": _as_qubo(cycle_poly, reg),
        "reduction": _as_qubo(gadgets, reg),
    }
    return Assembly(full, pen, blocks)


def assemble(table: LocalScoreTable, m=None, pen="auto") -> Qubo:
    return assemble_blocks(table, m, pen).qubo


def encode(dag: Dag, reg: VarRegistry) -> np.ndarray:
    """Zero-penalty assignment for an acyclic graph obeying the parent caps."""
    if dag.n != reg.n:
        raise ValueError("graph and registry have different node counts")
    try:
        order = dag.topological_order()
    except CycleError:
        raise CycleError("cannot encode a cyclic graph") from None
    x = np.zeros(reg.size, dtype=np.uint8)
    for a, b in dag.arcs:
        x[reg.d(a, b)] = 1
    pos = {v: k for k, v in enumerate(order)}
    for i, j in combinations(range(reg.n), 2):
        x[reg.r(i, j)] = 1 if pos[i] < pos[j] else 0
    for i, deg in enumerate(dag.indegrees()):
        slack = reg.m[i] - deg
        if slack < 0:
            raise ValueError(f"node {reg.names[i]} has {deg} parents, cap is {reg.m[i]}")
        for l in range(reg.mu):
            x[reg.y(i, l)] = (slack >> l) & 1
    for k, (u, v) in enumerate(reg.ancillas):
        x[reg.ancilla_base + k] = x[u] & x[v]
    return x


# ----------------------------------------------------------------------- I/O

_LABEL = re.compile(r"^(d|r|y)\(([^,]+),([^)]+)\)$|^ancilla\(([^,]+),\{([^,]+),([^}]+)\}\)$|^ancilla\(#(\d+),#(\d+)\)$")


def write_legend(reg: VarRegistry) -> str:
    return "".join(f"{k}\t{reg.label(k)}\n" for k in range(reg.size))


def write_qubo(qubo: Qubo) -> str:
    reg = qubo.registry
    out = io.StringIO()
    out.write("# bnqubo QUBO\n")
    out.write(f"# nodes: {','.join(reg.names)}\n")
    out.write(f"# caps: {','.join(str(v) for v in reg.m)}\n")
    for k in range(reg.size):
        out.write(f"# {k} {reg.label(k)}\n")
    out.write(f"q {reg.size} {qubo.n_terms()} {qubo.offset:.17g}\n")
    for v, c in sorted(qubo.linear.items()):
        out.write(f"{v} {v} {c:.17g}\n")
    for (u, v), c in sorted(qubo.quadratic.items()):
        out.write(f"{u} {v} {c:.17g}\n")
    return out.getvalue()


def read_qubo(text: str) -> Qubo:
    names: tuple[str, ...] | None = None
    caps: tuple[int, ...] | None = None
    labels: dict[int, str] = {}
    header = None
    terms = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("nodes:"):
                names = tuple(s for s in body[6:].strip().split(","))
            elif body.startswith("caps:"):
                caps = tuple(int(s) for s in body[5:].strip().split(","))
            else:
                parts = body.split(" ", 1)
                if len(parts) == 2 and parts[0].isdigit():
                    labels[int(parts[0])] = parts[1]
            continue
        parts = line.split()
        if parts[0] == "q":
            if len(parts) != 4:
                raise ValueError(f"line {lineno}: malformed header")
            header = (int(parts[1]), int(parts[2]), float(parts[3]))
            continue
        if header is None or len(parts) != 3:
            raise ValueError(f"line {lineno}: expected '<i> <j> <coeff>' after the header")
        terms.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if header is None or names is None or caps is None:
        raise ValueError("QUBO file lacks the header or registry comments")
    reg = VarRegistry(names, caps)
    lookup = {nm: i for i, nm in enumerate(names)}
    for k in range(reg.ancilla_base, header[0]):
        match = _LABEL.match(labels.get(k, ""))
        if not match or not (match.group(4) or match.group(7)):
            raise ValueError(f"variable {k}: missing ancilla legend entry")
        if match.group(4):
            child = lookup[match.group(4)]
            u, v = reg.d(lookup[match.group(5)], child), reg.d(lookup[match.group(6)], child)
        else:
            u, v = int(match.group(7)), int(match.group(8))
        reg, _ = reg.with_ancilla(u, v)
    if reg.size != header[0]:
        raise ValueError(f"header declares {header[0]} variables, legend implies {reg.size}")
    if len(terms) != header[1]:
        raise ValueError(f"header declares {header[1]} terms, found {len(terms)}")
    q = Qubo(reg, offset=header[2])
    for i, j, c in terms:
        if not (0 <= i <= j < reg.size):
            raise ValueError(f"term ({i}, {j}) out of range or not i <= j")
        if i == j:
            q.linear[i] = c
        else:
            q.quadratic[(i, j)] = c
    return q
