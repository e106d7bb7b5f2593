"""Generalized Feynman graphs: validation, predicates and canonical forms.

A graph has ``n_outer`` outer full vertices, inner full vertices with the
given arities, and a collection of empty vertices.  An empty vertex is just
the multiset of endpoints attached to it; an endpoint is ``(v, leg)`` for
leg ``leg`` of inner vertex ``v`` or ``(-1, i)`` for outer vertex ``i``.
Empty vertices carry no identity of their own.

Two graphs are topologically equivalent when they differ by a permutation
of the inner full vertices (within equal arity) and of the legs at each
inner vertex.  Up to leg permutations a graph is fully described by its
incidence counts (how many legs of each full vertex end on each empty
vertex), so the canonical key is the lexicographically smallest sorted
column list of the incidence matrix over admissible vertex orders.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Any, Iterable, Iterator, Sequence

from .partitions import (
    BlockStructure,
    enumerate_partitions,
    enumerate_restricted,
    is_connected_partition,
    is_wick_partition,
    partition_to_graph,
)

Endpoint = tuple[int, int]
CanonicalKey = tuple


class GraphError(ValueError):
    pass


def _norm_empties(empties: Iterable[Iterable[Endpoint]]) -> tuple[tuple[Endpoint, ...], ...]:
    out = []
    for e in empties:
        e = tuple(sorted((int(v), int(l)) for v, l in e))
        if not e:
            raise GraphError("empty vertices must have at least one leg")
        out.append(e)
    return tuple(sorted(out))


@dataclass(frozen=True)
class GenFeynmanGraph:
    n_outer: int
    arities: tuple[int, ...]
    empties: tuple[tuple[Endpoint, ...], ...]
    distinguishable_legs: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "arities", tuple(int(p) for p in self.arities))
        object.__setattr__(self, "empties", _norm_empties(self.empties))
        self._validate()

    def _validate(self) -> None:
        counts = Counter(ep for e in self.empties for ep in e)
        expected: Counter = Counter()
        for i in range(self.n_outer):
            expected[(-1, i)] = 1
        for v, p in enumerate(self.arities):
            if p < 1:
                raise GraphError("inner full vertices need at least one leg")
            if self.distinguishable_legs:
                for leg in range(p):
                    expected[(v, leg)] = 1
            else:
                expected[(v, 0)] = p
        if counts != expected:
            raise GraphError("every full-vertex leg and outer vertex must end on exactly one edge")

    @property
    def m(self) -> int:
        return len(self.arities)

    def empty_sizes(self) -> list[int]:
        return [len(e) for e in self.empties]

    def incidence(self) -> list[list[int]]:
        """Rows: outer vertices then inner vertices; columns: empty vertices."""
        rows = self.n_outer + self.m
        mat = [[0] * len(self.empties) for _ in range(rows)]
        for c, e in enumerate(self.empties):
            for v, leg in e:
                r = leg if v == -1 else self.n_outer + v
                mat[r][c] += 1
        return mat

    def forget_legs(self) -> "GenFeynmanGraph":
        if not self.distinguishable_legs:
            return self
        empties = [[(v, l if v == -1 else 0) for v, l in e] for e in self.empties]
        return GenFeynmanGraph(self.n_outer, self.arities, empties, distinguishable_legs=False)

    def relabel(self, vertex_perm: Sequence[int], leg_perms: Sequence[Sequence[int]] | None = None) -> "GenFeynmanGraph":
        """Move inner vertex v to position vertex_perm[v] and leg l to leg_perms[v][l]."""
        arities = [0] * self.m
        for v, p in enumerate(self.arities):
            arities[vertex_perm[v]] = p
        empties = []
        for e in self.empties:
            new = []
            for v, l in e:
                if v == -1:
                    new.append((v, l))
                else:
                    nl = leg_perms[v][l] if (leg_perms is not None and self.distinguishable_legs) else l
                    new.append((vertex_perm[v], nl))
            empties.append(new)
        return GenFeynmanGraph(self.n_outer, tuple(arities), empties, self.distinguishable_legs)

    # structured output
    def to_dict(self) -> dict[str, Any]:
        return {
            "outer": list(range(self.n_outer)),
            "full": [{"id": v, "legs": p} for v, p in enumerate(self.arities)],
            "empty": [[l if v == -1 else [v, l] for v, l in e] for e in self.empties],
            "distinguishable_legs": self.distinguishable_legs,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GenFeynmanGraph":
        full = sorted(d["full"], key=lambda f: f["id"])
        if [f["id"] for f in full] != list(range(len(full))):
            raise GraphError("full vertex ids must be 0..m-1")
        if list(d["outer"]) != list(range(len(d["outer"]))):
            raise GraphError("outer ids must be 0..n-1")
        empties = [[(-1, ep) if isinstance(ep, int) else (ep[0], ep[1]) for ep in e] for e in d["empty"]]
        return cls(len(d["outer"]), tuple(f["legs"] for f in full), empties, bool(d.get("distinguishable_legs", True)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "GenFeynmanGraph":
        return cls.from_dict(json.loads(s))


def is_connected(g: GenFeynmanGraph) -> bool:
    """Connectivity of the vertex set under edges.  The graph with no
    vertices at all counts as connected."""
    n_nodes = g.n_outer + g.m + len(g.empties)
    if n_nodes == 0:
        return True
    parent = list(range(n_nodes))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    base = g.n_outer + g.m
    for c, e in enumerate(g.empties):
        for v, leg in e:
            r = leg if v == -1 else g.n_outer + v
            a, b = find(r), find(base + c)
            if a != b:
                parent[a] = b
    root = find(0)
    return all(find(i) == root for i in range(n_nodes))


def has_self_contraction(g: GenFeynmanGraph) -> bool:
    for e in g.empties:
        owners = {v for v, _ in e}
        if len(owners) == 1 and next(iter(owners)) >= 0:
            return True
    return False


def has_second_kind_self_contraction(g: GenFeynmanGraph) -> bool:
    """Some 2-leg inner vertex has both legs on the same empty vertex."""
    if any(p != 2 for p in g.arities):
        raise GraphError("second-kind self-contractions are defined for graphs with 2-leg vertices only")
    for e in g.empties:
        c = Counter(v for v, _ in e if v >= 0)
        if any(k == 2 for k in c.values()):
            return True
    return False


def is_outer_touching(g: GenFeynmanGraph) -> bool:
    """Every connected component contains an outer vertex."""
    n_nodes = g.n_outer + g.m + len(g.empties)
    parent = list(range(n_nodes))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    base = g.n_outer + g.m
    for c, e in enumerate(g.empties):
        for v, leg in e:
            r = leg if v == -1 else g.n_outer + v
            a, b = find(r), find(base + c)
            if a != b:
                parent[a] = b
    outer_roots = {find(i) for i in range(g.n_outer)}
    return all(find(i) in outer_roots for i in range(n_nodes))


def _vertex_invariant(mat: list[list[int]], n_outer: int, r: int, arity: int) -> tuple:
    # multiset of (legs on column, column size, outer legs on column)
    cols = []
    for c in range(len(mat[0]) if mat else 0):
        k = mat[r][c]
        if k:
            size = sum(mat[i][c] for i in range(len(mat)))
            outer = tuple(mat[i][c] for i in range(n_outer))
            cols.append((k, size, outer))
    return (arity, tuple(sorted(cols)))


def canonicalize(g: GenFeynmanGraph) -> CanonicalKey:
    """Order-independent key; outer vertices keep their positions."""
    mat = g.incidence()
    n = g.n_outer
    inv = [(_vertex_invariant(mat, n, n + v, g.arities[v]), v) for v in range(g.m)]
    inv.sort()
    groups: list[list[int]] = []
    last = None
    for key, v in inv:
        if key != last:
            groups.append([])
            last = key
        groups[-1].append(v)
    ncols = len(g.empties)
    outer_part = [tuple(mat[i][c] for i in range(n)) for c in range(ncols)]
    best = None
    for choice in product(*(permutations(grp) for grp in groups)):
        order = [v for grp in choice for v in grp]
        cols = sorted(outer_part[c] + tuple(mat[n + v][c] for v in order) for c in range(ncols))
        t = tuple(cols)
        if best is None or t < best:
            best = t
    arities = tuple(g.arities[v] for _, v in inv)
    return (n, arities, best if best is not None else ())


def graph_from_key(key: CanonicalKey, distinguishable_legs: bool = True) -> GenFeynmanGraph:
    n, arities, cols = key
    next_leg = [0] * len(arities)
    empties = []
    for col in cols:
        e = []
        for i in range(n):
            for _ in range(col[i]):
                e.append((-1, i))
        for v in range(len(arities)):
            for _ in range(col[n + v]):
                if distinguishable_legs:
                    e.append((v, next_leg[v]))
                    next_leg[v] += 1
                else:
                    e.append((v, 0))
        empties.append(e)
    return GenFeynmanGraph(n, arities, empties, distinguishable_legs)


@dataclass
class TopologicalClass:
    canonical_key: CanonicalKey
    multiplicity: int
    representative: GenFeynmanGraph
    members: list[GenFeynmanGraph] = field(default_factory=list, repr=False)


def classify(graphs: Iterable[GenFeynmanGraph], keep_members: bool = False) -> list[TopologicalClass]:
    """Group graphs by canonical key; classes come back sorted by key."""
    table: dict[CanonicalKey, TopologicalClass] = {}
    for g in graphs:
        k = canonicalize(g)
        cls = table.get(k)
        if cls is None:
            cls = table[k] = TopologicalClass(k, 0, g)
        cls.multiplicity += 1
        if keep_members:
            cls.members.append(g)
    return [table[k] for k in sorted(table)]


def merge_classes(tables: Iterable[list[TopologicalClass]]) -> list[TopologicalClass]:
    """Combine class lists computed on disjoint shards of an input stream."""
    out: dict[CanonicalKey, TopologicalClass] = {}
    for tab in tables:
        for c in tab:
            if c.canonical_key in out:
                out[c.canonical_key].multiplicity += c.multiplicity
            else:
                out[c.canonical_key] = TopologicalClass(c.canonical_key, c.multiplicity, c.representative)
    return [out[k] for k in sorted(out)]


def enumerate_graphs(
    arities: Sequence[int],
    n_outer: int = 0,
    *,
    connected: bool = False,
    wick: bool = False,
    even_only: bool = False,
    outer_touching: bool = False,
    soft_cap: int | None = None,
) -> Iterator[GenFeynmanGraph]:
    """All labelled graphs with the given inner arities (one per partition)."""
    s = BlockStructure.from_arities(arities, n_outer)
    owner = s.owner()
    if even_only or wick:
        def ok(part: frozenset[int]) -> bool:
            if even_only and len(part) % 2:
                return False
            if wick:
                owners = {owner[x] for x in part}
                if len(owners) == 1 and next(iter(owners)) >= 0:
                    return False
            return True
        stream = enumerate_restricted(s.ground_set, ok, soft_cap=soft_cap)
    else:
        stream = enumerate_partitions(s.ground_set, soft_cap=soft_cap)
    for p in stream:
        if connected and not is_connected_partition(p, s):
            continue
        if wick and not is_wick_partition(p, s):
            continue
        g = partition_to_graph(p, s)
        if outer_touching and not is_outer_touching(g):
            continue
        yield g


def thin_edge_multigraph(g: GenFeynmanGraph) -> tuple[int, list[tuple[int, int]], list[int]]:
    """For 2-leg vertex graphs: (number of empty nodes, edges between empty
    nodes, empty node of each outer vertex).  Each inner vertex becomes one
    edge; loops appear as (a, a)."""
    if any(p != 2 for p in g.arities):
        raise GraphError("thin-edge form needs all inner vertices of arity 2")
    where: dict[Endpoint, int] = {}
    for c, e in enumerate(g.empties):
        for ep in e:
            where.setdefault(ep, c)
    edges = []
    for v in range(g.m):
        if g.distinguishable_legs:
            a, b = where[(v, 0)], where[(v, 1)]
        else:
            cs = [c for c, e in enumerate(g.empties) for ep in e if ep == (v, 0)]
            a, b = cs[0], cs[1]
        edges.append((min(a, b), max(a, b)))
    outer = [where[(-1, i)] for i in range(g.n_outer)]
    return len(g.empties), edges, outer
