"""Set partitions, block structures and the partition/graph correspondence.

Partitions are enumerated in restricted-growth-string (RGS) order.  A
:class:`BlockStructure` records which labels are legs of which inner full
vertex and which labels are outer points; the predicates here
(connectivity, absence of self-contractions) are defined relative to it.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Iterator, Sequence

HARD_LABEL_CAP = 16


class PartitionError(ValueError):
    """Structural problem with a partition or block structure."""


class EnumerationLimitError(RuntimeError):
    """Raised when an exhaustive enumeration would be too large."""


@dataclass(frozen=True)
class SetPartition:
    ground_set: frozenset[int]
    parts: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        seen: set[int] = set()
        for part in self.parts:
            if not part:
                raise PartitionError("empty part")
            if seen & part:
                raise PartitionError("parts are not disjoint")
            seen |= part
        if seen != set(self.ground_set):
            raise PartitionError("parts do not cover the ground set")
        ordered = tuple(sorted(self.parts, key=min))
        object.__setattr__(self, "parts", ordered)

    @classmethod
    def from_parts(cls, parts: Iterable[Iterable[int]]) -> "SetPartition":
        fs = tuple(frozenset(p) for p in parts)
        ground = frozenset().union(*fs) if fs else frozenset()
        return cls(ground, fs)

    def __len__(self) -> int:
        return len(self.parts)

    def as_lists(self) -> list[list[int]]:
        return [sorted(p) for p in self.parts]

    def block_of(self, label: int) -> frozenset[int]:
        for p in self.parts:
            if label in p:
                return p
        raise KeyError(label)


@dataclass(frozen=True)
class BlockStructure:
    """Blocks J_1..J_m (legs of inner full vertices) and outer labels X."""

    blocks: tuple[tuple[int, ...], ...]
    outer: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        blocks = tuple(tuple(sorted(b)) for b in self.blocks)
        outer = tuple(sorted(self.outer))
        allx = [x for b in blocks for x in b] + list(outer)
        if len(set(allx)) != len(allx):
            raise PartitionError("blocks and outer labels must be pairwise disjoint")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "outer", outer)

    @classmethod
    def from_arities(cls, arities: Sequence[int], n_outer: int = 0) -> "BlockStructure":
        """Consecutive labels: outer points first, then the legs of each vertex."""
        outer = tuple(range(n_outer))
        blocks = []
        nxt = n_outer
        for p in arities:
            blocks.append(tuple(range(nxt, nxt + p)))
            nxt += p
        return cls(tuple(blocks), outer)

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    @property
    def ground_set(self) -> frozenset[int]:
        return frozenset(self.outer).union(*map(frozenset, self.blocks))

    def owner(self) -> dict[int, int]:
        """Map label -> block index; outer labels map to -1 - position."""
        own = {x: j for j, b in enumerate(self.blocks) for x in b}
        own.update({x: -1 - i for i, x in enumerate(self.outer)})
        return own

    def connectivity_blocks(self) -> list[frozenset[int]]:
        # outer points act as singleton blocks
        return [frozenset(b) for b in self.blocks] + [frozenset([x]) for x in self.outer]


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[0]


def _check_size(n: int, soft_cap: int | None) -> None:
    if n >= HARD_LABEL_CAP:
        raise EnumerationLimitError(
            f"exhaustive enumeration refused: {n} labels (limit is {HARD_LABEL_CAP - 1}, "
            f"B({n}) = {bell_number(n)} partitions)"
        )
    if soft_cap is not None and n > soft_cap:
        raise EnumerationLimitError(f"exhaustive enumeration refused: {n} labels exceeds soft cap {soft_cap}")


def _rgs_stream(n: int) -> Iterator[list[int]]:
    if n == 0:
        yield []
        return
    a = [0] * n
    b = [0] * n  # b[i] = 1 + max(a[:i])
    b[0] = 0
    for i in range(1, n):
        b[i] = 1
    while True:
        yield a
        # find rightmost position that can be incremented
        i = n - 1
        while i > 0 and a[i] == b[i]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        tail_max = max(b[i], a[i] + 1)
        for j in range(i + 1, n):
            a[j] = 0
            b[j] = tail_max


def rgs_to_partition(rgs: Sequence[int], labels: Sequence[int]) -> SetPartition:
    k = max(rgs) + 1 if rgs else 0
    parts: list[list[int]] = [[] for _ in range(k)]
    for lab, r in zip(labels, rgs):
        parts[r].append(lab)
    return SetPartition(frozenset(labels), tuple(frozenset(p) for p in parts))


def enumerate_partitions(
    ground_set: Iterable[int],
    *,
    start: int = 0,
    stop: int | None = None,
    soft_cap: int | None = None,
) -> Iterator[SetPartition]:
    """Yield every partition of ``ground_set`` once, in RGS order.

    ``start``/``stop`` select an index range of the canonical order so that
    disjoint ranges can be handed to different workers.
    """
    labels = sorted(set(ground_set))
    _check_size(len(labels), soft_cap)
    for idx, rgs in enumerate(_rgs_stream(len(labels))):
        if idx < start:
            continue
        if stop is not None and idx >= stop:
            return
        yield rgs_to_partition(rgs, labels)


def enumerate_restricted(
    ground_set: Iterable[int],
    part_ok: Callable[[frozenset[int]], bool],
    *,
    soft_cap: int | None = None,
) -> Iterator[SetPartition]:
    """Partitions all of whose parts satisfy ``part_ok``.

    Builds the part containing the smallest remaining label first, so whole
    subtrees are pruned when a part is rejected.  Order is deterministic
    (lexicographic in the sequence of chosen parts) but not RGS order.
    """
    labels = tuple(sorted(set(ground_set)))
    _check_size(len(labels), soft_cap)

    def rec(rest: tuple[int, ...]) -> Iterator[list[frozenset[int]]]:
        if not rest:
            yield []
            return
        head, tail = rest[0], rest[1:]
        for k in range(len(tail) + 1):
            for extra in combinations(tail, k):
                part = frozenset((head,) + extra)
                if not part_ok(part):
                    continue
                remaining = tuple(x for x in tail if x not in part)
                for sub in rec(remaining):
                    yield [part] + sub

    for parts in rec(labels):
        yield SetPartition(frozenset(labels), tuple(parts))


def _check_matches(p: SetPartition, s: BlockStructure) -> None:
    if p.ground_set != s.ground_set:
        raise PartitionError(
            f"partition ground set {sorted(p.ground_set)} does not match block structure {sorted(s.ground_set)}"
        )


def is_connected_partition(p: SetPartition, s: BlockStructure) -> bool:
    """True iff no proper sub-collection of parts exactly covers a proper
    sub-collection of blocks (outer points count as singleton blocks)."""
    _check_matches(p, s)
    blocks = s.connectivity_blocks()
    if len(blocks) <= 1:
        return True
    # union-find over blocks, merged through shared parts
    owner: dict[int, int] = {}
    for j, b in enumerate(blocks):
        for x in b:
            owner[x] = j
    parent = list(range(len(blocks)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for part in p.parts:
        it = iter(part)
        r0 = find(owner[next(it)])
        for x in it:
            r = find(owner[x])
            if r != r0:
                parent[r] = r0
    root = find(0)
    return all(find(j) == root for j in range(len(blocks)))


def is_wick_partition(p: SetPartition, s: BlockStructure) -> bool:
    """True iff no part lies inside a single block J_l."""
    _check_matches(p, s)
    blocks = [frozenset(b) for b in s.blocks]
    return not any(part <= b for part in p.parts for b in blocks)


def partition_to_graph(p: SetPartition, s: BlockStructure, *, distinguishable_legs: bool = True):
    from .graphs import Endpoint, GenFeynmanGraph

    _check_matches(p, s)
    where: dict[int, Endpoint] = {}
    for i, x in enumerate(s.outer):
        where[x] = (-1, i)
    for j, b in enumerate(s.blocks):
        for leg, x in enumerate(b):
            where[x] = (j, leg if distinguishable_legs else 0)
    empties = [tuple(where[x] for x in part) for part in p.parts]
    return GenFeynmanGraph(
        n_outer=len(s.outer),
        arities=s.arities,
        empties=empties,
        distinguishable_legs=distinguishable_legs,
    )


def graph_to_partition(g, s: BlockStructure) -> SetPartition:
    if tuple(g.arities) != s.arities or g.n_outer != len(s.outer):
        raise PartitionError(
            f"graph (n={g.n_outer}, arities={tuple(g.arities)}) inconsistent with "
            f"block structure (n={len(s.outer)}, arities={s.arities})"
        )
    if not g.distinguishable_legs:
        raise PartitionError("graphs with non-distinguishable legs do not determine a unique partition")
    parts = []
    for e in g.empties:
        part = set()
        for v, leg in e:
            part.add(s.outer[leg] if v == -1 else s.blocks[v][leg])
        parts.append(frozenset(part))
    return SetPartition(s.ground_set, tuple(parts))
