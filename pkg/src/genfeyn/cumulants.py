"""Moments, truncated moments (cumulants) and Wick-ordered monomials.

Tables are indexed by sorted tuples of site labels, so a key is a
multiset of sites and coinciding sites are allowed.  Values are exact
(``Fraction`` or sympy expressions).  The convention for the empty
multiset is ``<>^T = 0`` and ``<> = 1``.

All sums run over set partitions of *positions* in the argument tuple, so
repeated sites are treated as distinct factors as they must be.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import prod
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

from .partitions import BlockStructure, SetPartition, enumerate_partitions, is_connected_partition, is_wick_partition

Key = tuple


class IncompleteTableError(KeyError):
    def __init__(self, missing: Sequence[Key]):
        self.missing = list(missing)
        super().__init__(f"table has no entry for {', '.join(str(list(k)) for k in self.missing)}")


def _key(sites: Iterable[Hashable]) -> Key:
    return tuple(sorted(sites))


class _Table:
    """Immutable map from site multisets to values, or a callable rule."""

    def __init__(self, values: Mapping[Key, Any] | None = None, rule: Callable[[Key], Any] | None = None):
        self._values = {_key(k): v for k, v in (values or {}).items()}
        self._rule = rule

    def __getitem__(self, sites: Iterable[Hashable]) -> Any:
        k = _key(sites)
        if k in self._values:
            return self._values[k]
        if self._rule is not None:
            return self._rule(k)
        raise IncompleteTableError([k])

    def __contains__(self, sites) -> bool:
        return self._rule is not None or _key(sites) in self._values

    def keys(self) -> list[Key]:
        return sorted(self._values)

    def items(self):
        return [(k, self._values[k]) for k in self.keys()]

    def missing(self, needed: Iterable[Key]) -> list[Key]:
        return [k for k in needed if k not in self]


class CumulantTable(_Table):
    """Truncated moments <.>^T."""

    def __getitem__(self, sites):
        k = _key(sites)
        if not k:
            return 0
        return super().__getitem__(k)


class MomentTable(_Table):
    """Plain moments <.>."""

    def __getitem__(self, sites):
        k = _key(sites)
        if not k:
            return 1
        return super().__getitem__(k)


def _subkeys(J: Sequence) -> list[Key]:
    J = list(J)
    out = set()
    for r in range(1, len(J) + 1):
        for c in combinations(range(len(J)), r):
            out.add(_key(J[i] for i in c))
    return sorted(out)


def _require(table: _Table, J: Sequence) -> None:
    miss = table.missing(_subkeys(J))
    if miss:
        raise IncompleteTableError(miss)


def _cumulants_to_moments(c: CumulantTable, J: Key) -> Any:
    @lru_cache(maxsize=None)
    def mom(k: Key) -> Any:
        if not k:
            return 1
        head, tail = k[0], k[1:]
        total = 0
        n = len(tail)
        for r in range(n + 1):
            for pos in combinations(range(n), r):
                part = (head,) + tuple(tail[i] for i in pos)
                rest = tuple(tail[i] for i in range(n) if i not in pos)
                total += c[part] * mom(rest)
        return total

    return mom(J)


def cumulants_to_moments(c: CumulantTable, J: Sequence) -> Any:
    """<J> as the sum over partitions of J of products of truncated values."""
    _require(c, J)
    return _cumulants_to_moments(c, _key(J))


def moments_to_cumulants(m: MomentTable, J: Sequence) -> Any:
    """Solve the partition recursion for <J>^T."""
    _require(m, J)

    @lru_cache(maxsize=None)
    def cum(k: Key) -> Any:
        if not k:
            return 0
        head, tail = k[0], k[1:]
        n = len(tail)
        total = m[k]
        for r in range(n):  # parts containing head other than k itself
            for pos in combinations(range(n), r):
                part = (head,) + tuple(tail[i] for i in pos)
                rest = tuple(tail[i] for i in range(n) if i not in pos)
                total -= cum(part) * m[rest]
        return total

    return cum(_key(J))


def moment_table_from_cumulants(c: CumulantTable, keys: Iterable[Sequence]) -> MomentTable:
    return MomentTable({_key(k): cumulants_to_moments(c, k) for k in keys})


def cumulant_table_from_moments(m: MomentTable, keys: Iterable[Sequence]) -> CumulantTable:
    return CumulantTable({_key(k): moments_to_cumulants(m, k) for k in keys})


def moment_of(c: CumulantTable, sites: Sequence) -> Any:
    """<sites> for a multiset of sites, computed from the truncated table."""
    return _cumulants_to_moments(c, _key(sites))


def _positions_sum(c: CumulantTable, sites: Sequence, s: BlockStructure, pred) -> Any:
    total = 0
    for p in enumerate_partitions(s.ground_set):
        if pred(p, s):
            total += prod((c[[sites[i] for i in part]] for part in p.parts), start=1)
    return total


def _structure(blocks: Sequence[Sequence], X: Sequence = ()) -> tuple[list, BlockStructure]:
    sites: list = []
    bl = []
    for b in blocks:
        bl.append(tuple(range(len(sites), len(sites) + len(b))))
        sites.extend(b)
    outer = tuple(range(len(sites), len(sites) + len(X)))
    sites.extend(X)
    return sites, BlockStructure(tuple(bl), outer)


def wick_pairing_moment(blocks: Sequence[Sequence], X: Sequence, c: CumulantTable) -> Any:
    """Sum over partitions with no part inside a single block (parts inside X
    are allowed) of products of truncated values."""
    sites, s = _structure(blocks, X)
    return _positions_sum(c, sites, s, is_wick_partition)


def block_truncated_moment(blocks: Sequence[Sequence], c: CumulantTable) -> Any:
    """<J_1 ... J_m>^(T): sum over partitions connected w.r.t. the blocks."""
    sites, s = _structure(blocks)
    return _positions_sum(c, sites, s, is_connected_partition)


@dataclass(frozen=True)
class WickPolynomial:
    """:X: written as sum_S coeff(S) * prod_{i in S} phi(X_i); S are position sets."""

    base: tuple
    expansion: dict = field(hash=False)

    def coefficient(self, positions: Iterable[int]) -> Any:
        return self.expansion.get(frozenset(positions), 0)

    def terms(self) -> list[tuple[tuple, Any]]:
        acc: dict[tuple, Any] = {}
        for S, coef in self.expansion.items():
            mono = _key(self.base[i] for i in S)
            acc[mono] = acc.get(mono, 0) + coef
        out = [(mono, coef) for mono, coef in acc.items() if coef != 0]
        out.sort(key=lambda t: (-len(t[0]), [str(x) for x in t[0]]))
        return out

    def render(self, name: Callable[[Any], str] = lambda s: f"phi({s})") -> str:
        pieces = []
        for mono, coef in self.terms():
            m = "*".join(name(s) for s in mono)
            if not m:
                pieces.append(str(coef))
            elif coef == 1:
                pieces.append(m)
            elif coef == -1:
                pieces.append("-" + m)
            else:
                pieces.append(f"({coef})*{m}")
        return " + ".join(pieces).replace("+ -", "- ") if pieces else "0"

    def expectation_with(self, Y: Sequence, c: CumulantTable) -> Any:
        """<:X: Y> by expanding into plain moments."""
        total = 0
        for S, coef in self.expansion.items():
            if coef != 0:
                total += coef * moment_of(c, [self.base[i] for i in S] + list(Y))
        return total


def wick_monomial(X: Sequence, c: CumulantTable) -> WickPolynomial:
    """Recursive definition: :X: = X - <X> - sum_{I, k>1} sum_j :I_j: prod_{l!=j} <I_l>^T."""
    X = tuple(X)
    _require(c, X)

    @lru_cache(maxsize=None)
    def wick(pos: frozenset[int]) -> dict:
        out: dict = {pos: 1}
        const = -moment_of(c, [X[i] for i in pos])
        out[frozenset()] = out.get(frozenset(), 0) + const
        for p in enumerate_partitions(pos):
            if len(p.parts) < 2:
                continue
            for j, Ij in enumerate(p.parts):
                w = prod((c[[X[i] for i in p.parts[l]]] for l in range(len(p.parts)) if l != j), start=1)
                if w == 0:
                    continue
                for S, coef in wick(Ij).items():
                    out[S] = out.get(S, 0) - coef * w
        return out

    exp = {S: v for S, v in wick(frozenset(range(len(X)))).items() if v != 0}
    return WickPolynomial(X, exp)


def wick_product_moment(blocks: Sequence[Sequence], X: Sequence, c: CumulantTable) -> Any:
    """<:J_1: ... :J_m: X> from the polynomial expansions of the factors."""
    polys = [wick_monomial(b, c) for b in blocks]
    terms: dict[tuple, Any] = {(): 1}
    for q in polys:
        nxt: dict[tuple, Any] = {}
        for mono, coef in terms.items():
            for S, k in q.expansion.items():
                if k == 0:
                    continue
                key = _key(mono + tuple(q.base[i] for i in S))
                nxt[key] = nxt.get(key, 0) + coef * k
        terms = nxt
    return sum((coef * moment_of(c, list(mono) + list(X)) for mono, coef in terms.items() if coef != 0), start=0)


# ingestion
def parse_value(v: Any) -> Fraction:
    if isinstance(v, bool):
        raise ValueError("booleans are not table values")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v.strip())
    raise ValueError(f"table values must be rational strings 'p/q' or integers, got {v!r}")


def load_table(doc: Mapping[str, Any]) -> tuple[str, _Table]:
    """Structured document ``{"kind": "moments"|"cumulants", "entries": [[sites, "p/q"], ...]}``."""
    kind = doc.get("kind")
    if kind not in ("moments", "cumulants"):
        raise ValueError("'kind' must be 'moments' or 'cumulants'")
    vals = {}
    for i, entry in enumerate(doc.get("entries", [])):
        try:
            sites, val = entry
            vals[_key(sites)] = parse_value(val)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"entry {i}: {exc}") from exc
    cls = MomentTable if kind == "moments" else CumulantTable
    return kind, cls(vals)


def dump_table(kind: str, table: _Table) -> dict[str, Any]:
    return {"kind": kind, "entries": [[list(k), str(v)] for k, v in table.items()]}


def load_table_file(path: str) -> tuple[str, _Table]:
    with open(path) as fh:
        return load_table(json.load(fh))
