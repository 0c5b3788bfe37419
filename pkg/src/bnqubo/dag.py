"""Directed graphs over named nodes, with acyclicity checked on demand."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


class CycleError(ValueError):
    pass


@dataclass(frozen=True)
class Dag:
    """A directed graph on nodes ``0..n-1``.

    Despite the name, acyclicity is not enforced at construction: decoded
    candidates may contain cycles and are flagged by :meth:`has_cycle`.
    """

    names: tuple[str, ...]
    arcs: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "arcs", frozenset((int(a), int(b)) for a, b in self.arcs))
        if len(set(self.names)) != len(self.names):
            raise ValueError("node names must be unique")
        n = len(self.names)
        for a, b in self.arcs:
            if a == b:
                raise ValueError(f"self-loop on node {self.names[a]!r}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"arc ({a}, {b}) out of range for {n} nodes")

    @classmethod
    def empty(cls, n: int, names: Sequence[str] | None = None) -> "Dag":
        return cls(tuple(names) if names is not None else default_names(n))

    @classmethod
    def from_parents(cls, parents: Sequence[Iterable[int]], names=None) -> "Dag":
        n = len(parents)
        arcs = {(p, i) for i, ps in enumerate(parents) for p in ps}
        return cls(tuple(names) if names is not None else default_names(n), frozenset(arcs))

    @property
    def n(self) -> int:
        return len(self.names)

    def parents(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(a for a, b in self.arcs if b == i))

    def children(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(b for a, b in self.arcs if a == i))

    def parent_sets(self) -> list[tuple[int, ...]]:
        ps: list[list[int]] = [[] for _ in range(self.n)]
        for a, b in self.arcs:
            ps[b].append(a)
        return [tuple(sorted(p)) for p in ps]

    def indegrees(self) -> list[int]:
        return [len(p) for p in self.parent_sets()]

    def sorted_arcs(self) -> list[tuple[int, int]]:
        return sorted(self.arcs)

    def topological_order(self) -> list[int]:
        """Kahn's algorithm, always releasing the lowest-index ready node.

        Raises CycleError if the graph has a directed cycle.
        """
        indeg = self.indegrees()
        children = [[] for _ in range(self.n)]
        for a, b in self.arcs:
            children[a].append(b)
        ready = sorted(i for i in range(self.n) if indeg[i] == 0)
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort()
        if len(order) != self.n:
            raise CycleError("graph contains a directed cycle")
        return order

    def has_cycle(self) -> bool:
        try:
            self.topological_order()
        except CycleError:
            return True
        return False

    def index(self, name: str) -> int:
        return self.names.index(name)


def default_names(n: int) -> tuple[str, ...]:
    return tuple(f"X{i}" for i in range(n))


def parse_arcs(text: str, names: Sequence[str]) -> Dag:
    """Parse ``SRC -> DST`` lines (blank lines and ``#`` comments ignored)."""
    names = tuple(names)
    lookup = {name: i for i, name in enumerate(names)}
    arcs = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise ValueError(f"line {lineno}: expected 'SRC -> DST', got {raw!r}")
        src, dst = (part.strip() for part in line.split("->", 1))
        for name in (src, dst):
            if name not in lookup:
                raise ValueError(f"line {lineno}: unknown node {name!r}")
        arcs.add((lookup[src], lookup[dst]))
    return Dag(names, frozenset(arcs))


def format_arcs(dag: Dag) -> str:
    return "".join(f"{dag.names[a]} -> {dag.names[b]}\n" for a, b in dag.sorted_arcs())


def arc_nodes(text: str) -> list[str]:
    """Node names in first-appearance order from an arc file."""
    seen: dict[str, None] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if "->" in line:
            for part in line.split("->", 1):
                seen.setdefault(part.strip(), None)
    return list(seen)
