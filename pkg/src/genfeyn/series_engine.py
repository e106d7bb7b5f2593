"""Perturbation series assembled from graph enumeration and evaluation rules.

Every series is a :class:`~genfeyn.formal_series.TruncatedSeries` in the
coupling symbols ``lambda_p`` whose coefficients are graph sums.  At order
``m`` a monomial ``prod_p lambda_p^(k_p)`` collects

    (-1)^m / prod_p k_p!  *  sum over labelled graphs with k_p vertices of arity p,

which is the ``(-1)^m / m!`` sum over all labelled graphs once the
``m! / prod k_p!`` ways of assigning arities to labelled vertices are
counted.  Graphs are grouped by topological class and each class is
evaluated once on its representative.

The charged-gas part works with thin-edge graphs: in a pure ``phi^2``
interaction each inner vertex joins two empty vertices through
``g * g``, and connected structures reduce to convolution powers.
"""
from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, permutations, product
from math import factorial, prod
from typing import Any, Iterable, Iterator, Mapping, Sequence

import sympy

from . import formal_series as fs
from .cumulants import CumulantTable
from .graphs import (
    CanonicalKey,
    GenFeynmanGraph,
    classify,
    enumerate_graphs,
    has_second_kind_self_contraction,
    has_self_contraction,
    is_connected,
    thin_edge_multigraph,
)
from .levy_models import GasParameters, printed_quartic_value, quartic_integral_value, ring_integral_value

log = logging.getLogger(__name__)

MAX_ORDER_GAS = 4
MAX_TOTAL_LEGS = 12


class OrderCapError(RuntimeError):
    pass


class UnsupportedGraphError(ValueError):
    pass


# ------------------------------------------------------------ interaction
@dataclass(frozen=True)
class InteractionPolynomial:
    """v(phi) = sum_p lambda_p phi^p (or lambda_p phi^p / p!)."""

    couplings: Mapping[int, Any]
    wick_ordered: bool = False
    factorial_convention: bool = False

    def __post_init__(self) -> None:
        cp = {int(p): v for p, v in dict(self.couplings).items() if not (not isinstance(v, sympy.Basic) and v == 0)}
        if any(p < 0 for p in cp):
            raise ValueError("powers must be nonnegative")
        object.__setattr__(self, "couplings", cp)
        top = self.max_degree
        if top and top % 2:
            raise ValueError("the highest power must be even")
        lead = cp.get(top)
        if top and not isinstance(lead, (sympy.Basic, str)) and not lead > 0:
            raise ValueError("the leading coupling must be positive")

    @classmethod
    def formal(cls, powers: Iterable[int], **kw) -> "InteractionPolynomial":
        return cls({p: sympy.Symbol(f"lambda_{p}") for p in powers}, **kw)

    @property
    def max_degree(self) -> int:
        return max(self.couplings, default=0)

    @property
    def arities(self) -> tuple[int, ...]:
        return tuple(sorted(p for p in self.couplings if p >= 1))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(f"lambda_{p}" for p in sorted(self.couplings))

    def evaluate(self, series: fs.TruncatedSeries) -> Any:
        """Substitute the coupling values into a series in the coupling symbols."""
        total = 0
        powers = sorted(self.couplings)
        for k, v in series.coeffs.items():
            total += v * prod((self.couplings[p] ** e for p, e in zip(powers, k)), start=1)
        return total


@dataclass
class SeriesTerm:
    order: int
    monomial: tuple[int, ...]
    canonical_key: CanonicalKey
    multiplicity: int
    weight: Fraction
    sign: int
    value: Any

    @property
    def contribution(self) -> Any:
        return self.sign * self.weight * self.value

    def as_record(self) -> dict[str, Any]:
        return {
            "order": self.order,
            "monomial": list(self.monomial),
            "canonical_key": repr(self.canonical_key),
            "multiplicity": self.multiplicity,
            "weight": str(self.weight),
            "sign": self.sign,
            "value": str(self.value),
        }


@dataclass
class SeriesResult:
    series: fs.TruncatedSeries
    terms: list[SeriesTerm] = field(default_factory=list)

    def order_total(self, m: int) -> Any:
        return sum((t.contribution for t in self.terms if t.order == m), start=0)


# ------------------------------------------------------------ evaluation rules
class GraphRules:
    """Base class for per-graph evaluation rules."""

    symmetric: bool = False
    volume: Any = 1

    def value(self, g: GenFeynmanGraph) -> Any:
        raise NotImplementedError

    def density_value(self, g: GenFeynmanGraph) -> Any:
        raise NotImplementedError


class SiteRules(GraphRules):
    """Finite site space: integrals over full-vertex positions become sums.

    ``outer_sites`` fixes the positions of the outer vertices.  For the
    density convention inner vertex 0 is pinned at ``origin``, which for a
    translation invariant table equals the plain value divided by the
    number of sites.
    """

    def __init__(self, table: CumulantTable, sites: Sequence, outer_sites: Sequence = (), *,
                 origin: Any = None, symmetric: bool = False):
        self.table = table
        self.sites = list(sites)
        self.outer_sites = list(outer_sites)
        self.origin = self.sites[0] if origin is None else origin
        self.symmetric = symmetric
        self.volume = len(self.sites)

    def _sum(self, g: GenFeynmanGraph, pinned: dict[int, Any]) -> Any:
        free = [v for v in range(g.m) if v not in pinned]
        empties = [[(v, l) for v, l in e] for e in g.empties]
        total = 0
        for assign in product(self.sites, repeat=len(free)):
            pos = dict(pinned)
            pos.update(zip(free, assign))
            term = 1
            for e in empties:
                pts = [self.outer_sites[l] if v == -1 else pos[v] for v, l in e]
                term = term * self.table[pts]
                if term == 0:
                    break
            total += term
        return total

    def value(self, g: GenFeynmanGraph) -> Any:
        return self._sum(g, {})

    def density_value(self, g: GenFeynmanGraph) -> Any:
        if g.m == 0:
            raise UnsupportedGraphError("density convention needs an inner vertex")
        return self._sum(g, {0: self.origin})


# ------------------------------------------------------------ enumeration core
def _arity_tuples(v: InteractionPolynomial, m: int) -> list[tuple[int, ...]]:
    return list(combinations_with_replacement(v.arities, m))


def _monomial(v: InteractionPolynomial, arities: Sequence[int]) -> tuple[int, ...]:
    c = Counter(arities)
    return tuple(c.get(p, 0) for p in sorted(v.couplings))


def _leg_weight(g: GenFeynmanGraph) -> Fraction:
    """Weight of an indistinguishable-leg graph for the phi^p/p! convention:
    1 / (prod over (vertex, empty) of #edges!  * prod over groups of identical
    empty vertices of (group size)!)."""
    mat = g.incidence()
    w = 1
    for row in mat[g.n_outer:]:
        for k in row:
            w *= factorial(k)
    cols = Counter(tuple(mat[r][c] for r in range(len(mat))) for c in range(len(g.empties)))
    for s in cols.values():
        w *= factorial(s)
    return Fraction(1, w)


def graph_terms(
    n: int,
    order: int,
    v: InteractionPolynomial,
    rules: GraphRules,
    *,
    connected: bool = False,
    outer_touching: bool = False,
    density: bool = False,
    orders: Iterable[int] | None = None,
    max_total_legs: int = MAX_TOTAL_LEGS,
) -> list[SeriesTerm]:
    """Class-level terms of the series, sorted by (order, monomial, key)."""
    terms: list[SeriesTerm] = []
    for m in (orders if orders is not None else range(order + 1)):
        for ar in _arity_tuples(v, m) if m else [()]:
            legs = n + sum(ar)
            if legs > max_total_legs:
                raise OrderCapError(
                    f"order {m} with arities {ar} needs {legs} labels (cap {max_total_legs})"
                )
            mono = _monomial(v, ar)
            kfact = prod(factorial(k) for k in mono)
            stream = enumerate_graphs(
                ar, n,
                connected=connected,
                wick=v.wick_ordered,
                even_only=rules.symmetric,
                outer_touching=outer_touching,
            )
            if density and m == 0:
                continue
            if v.factorial_convention:
                seen: dict[GenFeynmanGraph, int] = {}
                for g in stream:
                    h = g.forget_legs()
                    seen[h] = seen.get(h, 0) + 1
                by_class: dict[CanonicalKey, list] = {}
                for h in seen:
                    cls = classify([h])[0]
                    entry = by_class.setdefault(cls.canonical_key, [h, 0, Fraction(0)])
                    entry[1] += 1
                    entry[2] += _leg_weight(h)
                for key in sorted(by_class):
                    rep, count, wsum = by_class[key]
                    val = rules.density_value(rep) if density else rules.value(rep)
                    terms.append(SeriesTerm(m, mono, key, count, wsum / kfact, (-1) ** m, val))
            else:
                for cls in classify(stream):
                    rep = cls.representative
                    val = rules.density_value(rep) if density else rules.value(rep)
                    terms.append(
                        SeriesTerm(m, mono, cls.canonical_key, cls.multiplicity,
                                   Fraction(cls.multiplicity, kfact), (-1) ** m, val)
                    )
    return terms


def _assemble(v: InteractionPolynomial, order: int, terms: list[SeriesTerm], extra: Mapping | None = None) -> fs.TruncatedSeries:
    acc: dict[tuple, Any] = dict(extra or {})
    for t in terms:
        acc[t.monomial] = acc.get(t.monomial, 0) + t.contribution
    return fs.TruncatedSeries(v.variables, order, acc)


def _lambda0_index(v: InteractionPolynomial) -> int | None:
    return sorted(v.couplings).index(0) if 0 in v.couplings else None


def moment_series(n: int, order: int, v: InteractionPolynomial, rules: GraphRules) -> SeriesResult:
    """Moments of the unnormalised interacting measure: all graphs."""
    terms = graph_terms(n, order, v, rules)
    s = _assemble(v, order, terms)
    i0 = _lambda0_index(v)
    if i0 is not None:
        # exp(-lambda_0 |volume|) prefactor
        k = [0] * len(v.couplings)
        k[i0] = 1
        pref = fs.exp(fs.TruncatedSeries(v.variables, order, {tuple(k): -rules.volume}))
        s = pref * s
    return SeriesResult(s, terms)


def free_energy_series(order: int, v: InteractionPolynomial, rules: GraphRules) -> SeriesResult:
    """log Z as the sum over connected vacuum graphs."""
    terms = graph_terms(0, order, v, rules, connected=True, orders=range(1, order + 1))
    extra = {}
    i0 = _lambda0_index(v)
    if i0 is not None:
        k = [0] * len(v.couplings)
        k[i0] = 1
        extra[tuple(k)] = -rules.volume
    return SeriesResult(_assemble(v, order, terms, extra), terms)


def free_energy_density(order: int, v: InteractionPolynomial, rules: GraphRules) -> SeriesResult:
    """Per-volume free energy: connected graphs with one integration omitted."""
    terms = graph_terms(0, order, v, rules, connected=True, density=True, orders=range(1, order + 1))
    extra = {}
    i0 = _lambda0_index(v)
    if i0 is not None:
        k = [0] * len(v.couplings)
        k[i0] = 1
        extra[tuple(k)] = -1
    return SeriesResult(_assemble(v, order, terms, extra), terms)


def truncated_moment_series(n: int, order: int, v: InteractionPolynomial, rules: GraphRules) -> SeriesResult:
    """Truncated n-point functions of the interacting measure: connected graphs."""
    terms = graph_terms(n, order, v, rules, connected=True)
    return SeriesResult(_assemble(v, order, terms), terms)


def full_moment_series(n: int, order: int, v: InteractionPolynomial, rules: GraphRules) -> SeriesResult:
    """Normalised moments: every component must reach an outer vertex."""
    terms = graph_terms(n, order, v, rules, outer_touching=True)
    return SeriesResult(_assemble(v, order, terms), terms)


# ------------------------------------------------------------ covering factor
@dataclass
class CoveringReport:
    m: int
    n: int
    expected: int
    observed: set[int]
    targets: int
    pairs: int

    @property
    def ok(self) -> bool:
        return self.observed <= {self.expected} and self.pairs == self.expected * self.targets


def schwinger_covering(m: int, n: int, arities: Sequence[int] = (2,), *, even_only: bool = False) -> CoveringReport:
    """Enumerate connected vacuum graphs with m inner vertices of which n are
    one-legged source vertices; map each (graph, ordering of the source
    vertices) to the n-point graph obtained by turning source vertices into
    outer vertices, and count preimages."""
    counts: Counter = Counter()
    pairs = 0
    for S in combinations(range(m), n):
        rest = [i for i in range(m) if i not in S]
        for ar in product(arities, repeat=m - n):
            full = [0] * m
            for i in S:
                full[i] = 1
            for i, p in zip(rest, ar):
                full[i] = p
            src_index = {s: k for k, s in enumerate(S)}
            new_index = {r: k for k, r in enumerate(rest)}
            for G in enumerate_graphs(full, 0, connected=True, even_only=even_only):
                for sigma in permutations(range(n)):
                    empties = []
                    for e in G.empties:
                        new = []
                        for v, l in e:
                            if v in src_index:
                                new.append((-1, sigma[src_index[v]]))
                            else:
                                new.append((new_index[v], l))
                        empties.append(new)
                    Gp = GenFeynmanGraph(n, tuple(ar), empties)
                    counts[Gp] += 1
                    pairs += 1
    targets = 0
    for ar in product(arities, repeat=m - n):
        targets += sum(1 for _ in enumerate_graphs(ar, n, connected=True, even_only=even_only))
    expected = factorial(n) * math.comb(m, n)
    missing = targets - len(counts)
    observed = set(counts.values()) | ({0} if missing else set())
    return CoveringReport(m, n, expected, observed, targets, pairs)


def schwinger_truncated_moment(n: int, order: int, v: InteractionPolynomial, rules: GraphRules) -> Any:
    """Truncated n-point function at total order <= order (couplings substituted)
    computed through source vertices: (-1)^n sum_m (-1)^m/m! sum over graphs
    with n source vertices of sum_sigma V[G'].  Used as an independent check of
    the connected-graph formula."""
    total = 0
    lam = v.couplings
    for m in range(n, order + n + 1):
        for S in combinations(range(m), n):
            rest = [i for i in range(m) if i not in S]
            for ar in product(v.arities, repeat=m - n):
                full = [0] * m
                for i in S:
                    full[i] = 1
                for i, p in zip(rest, ar):
                    full[i] = p
                src = {s: k for k, s in enumerate(S)}
                newi = {r: k for k, r in enumerate(rest)}
                coup = prod((lam[p] for p in ar), start=1)
                for G in enumerate_graphs(full, 0, connected=True, wick=False, even_only=rules.symmetric):
                    for sigma in permutations(range(n)):
                        empties = [[(-1, sigma[src[x]]) if x in src else (newi[x], l) for x, l in e] for e in G.empties]
                        Gp = GenFeynmanGraph(n, tuple(ar), empties)
                        total += Fraction((-1) ** (m + n), factorial(m)) * coup * rules.value(Gp)
    return total


# ------------------------------------------------------------ thin-edge networks
@dataclass
class ThinNetwork:
    """Empty vertices joined by edges carrying convolution powers of g*g."""

    nodes: set[int]
    edges: list[tuple[int, int, int]]  # (a, b, power) with a <= b
    pinned: set[int] = field(default_factory=set)


@dataclass
class Reduction:
    factors: list[tuple]  # ("ring", n) | ("bundle", powers)
    remainder: ThinNetwork


def reduce_network(net: ThinNetwork) -> Reduction:
    """Loops, series pairs and pendant bundles are integrated out in closed form.

    - a loop of power a at any node gives gtilde_a(0);
    - an unpinned node with exactly two edges to distinct neighbours merges
      them into one edge of summed power (convolution);
    - an unpinned node all of whose edges go to a single other node is
      integrated out: int prod_i gtilde_(a_i)."""
    nodes = set(net.nodes)
    edges = list(net.edges)
    pinned = set(net.pinned)
    factors: list[tuple] = []
    changed = True
    while changed:
        changed = False
        keep = []
        for a, b, p in edges:
            if a == b:
                factors.append(("ring", p))
                changed = True
            else:
                keep.append((a, b, p))
        edges = keep
        for x in sorted(nodes):
            if x in pinned or len(nodes) < 2:
                continue
            inc = [e for e in edges if x in (e[0], e[1])]
            nbrs = {e[0] if e[1] == x else e[1] for e in inc}
            if len(inc) == 2 and len(nbrs) == 2:
                (a1, b1, p1), (a2, b2, p2) = inc
                u = a1 if b1 == x else b1
                w = a2 if b2 == x else b2
                for e in inc:
                    edges.remove(e)
                edges.append((min(u, w), max(u, w), p1 + p2))
                nodes.discard(x)
                changed = True
                break
            if len(nbrs) == 1 and inc:
                factors.append(("bundle", tuple(sorted(e[2] for e in inc))))
                for e in inc:
                    edges.remove(e)
                nodes.discard(x)
                changed = True
                break
            if not inc and len(nodes) > 1:
                raise UnsupportedGraphError("network is disconnected")
    return Reduction(factors, ThinNetwork(nodes, edges, pinned))


def _multigraph_key(nodes: set[int], edges: list[tuple[int, int, int]], pinned: Sequence[int] = ()) -> tuple:
    # tiny brute-force canonical form; pinned nodes keep their order first
    free = sorted(set(nodes) - set(pinned))
    best = None
    for perm in permutations(free):
        order = list(pinned) + list(perm)
        idx = {x: i for i, x in enumerate(order)}
        key = tuple(sorted((min(idx[a], idx[b]), max(idx[a], idx[b]), p) for a, b, p in edges))
        if best is None or key < best:
            best = key
    return (len(nodes), len(pinned), best or ())


def gt_symbol(n: int) -> sympy.Symbol:
    """gtilde_n(0) as a display symbol."""
    return sympy.Symbol(f"gt{n}(0)", positive=True)


def c_symbol(n: int) -> sympy.Symbol:
    return sympy.Symbol(f"c{n}", positive=True)


QUARTIC = sympy.Symbol("int(gt1^4)", positive=True)


def _bundle_symbol(powers: tuple[int, ...]) -> sympy.Expr:
    if len(powers) == 2:
        return gt_symbol(sum(powers))
    if powers == (1, 1, 1, 1):
        return QUARTIC
    return sympy.Symbol("int(" + "*".join(f"gt{p}" for p in powers) + ")", positive=True)


def thin_network_of(g: GenFeynmanGraph) -> ThinNetwork:
    n_nodes, edges, outer = thin_edge_multigraph(g)
    return ThinNetwork(set(range(n_nodes)), [(a, b, 1) for a, b in edges], set(outer))


def thin_edge_shape(g: GenFeynmanGraph) -> sympy.Expr:
    """Density value of a connected vacuum phi^2 graph written with c_n and
    gtilde symbols (gtilde includes lambda2)."""
    if g.n_outer:
        raise UnsupportedGraphError("shape is defined for vacuum graphs")
    net = thin_network_of(g)
    red = reduce_network(net)
    val = prod((c_symbol(len(e)) for e in g.empties), start=sympy.Integer(1))
    for kind, arg in red.factors:
        val *= gt_symbol(arg) if kind == "ring" else _bundle_symbol(arg)
    if red.remainder.edges:
        key = _multigraph_key(red.remainder.nodes, red.remainder.edges)
        val *= sympy.Symbol(f"R{key}", positive=True)
    return val


def _bundle_numeric(powers: tuple[int, ...], m0: float) -> float:
    from scipy import integrate

    from .levy_models import PropagatorSpec, gtilde_numeric

    spec = PropagatorSpec(2, 1, m0)
    f = lambda r: 2 * math.pi * r * float(prod(gtilde_numeric(p, r, 1.0, spec) for p in powers))
    val, _ = integrate.quad(f, 0, math.inf, limit=400)
    return val


class ThinEdgeGasRules(GraphRules):
    """Closed-form evaluation of phi^2 gas graphs at lambda2 = 1 (the coupling
    power is carried by the series variable).  ``volume`` multiplies each
    vacuum component in non-density values.  ``quartic="printed"`` swaps in
    the published value of int gtilde_1^4 for table comparisons."""

    symmetric = True

    def __init__(self, params: GasParameters, volume: Any = sympy.Symbol("V_Lambda", positive=True),
                 numeric_fallback: bool = False, quartic: str = "exact"):
        if quartic not in ("exact", "printed"):
            raise ValueError("quartic must be 'exact' or 'printed'")
        self.params = params
        self.volume = volume
        self.numeric_fallback = numeric_fallback
        m0 = sympy.sympify(params.m0)
        unit = GasParameters(params.beta, params.z, params.sigma, params.c, 1, params.m0)
        self._ring = lambda n: ring_integral_value(n, unit)
        self._quartic = quartic_integral_value(unit) if quartic == "exact" else printed_quartic_value(unit)
        self._m0 = m0

    def substitute(self, shape: sympy.Expr) -> sympy.Expr:
        subs = {}
        for s in shape.free_symbols:
            name = s.name
            if name.startswith("c") and name[1:].isdigit():
                subs[s] = self.params.gas_coupling(int(name[1:]))
            elif name.startswith("gt") and name.endswith("(0)"):
                subs[s] = self._ring(int(name[2:-3]))
            elif s == QUARTIC:
                subs[s] = self._quartic
            elif name.startswith("int(gt") and name.count("*") == 0:
                a = int(name[6:-1])
                subs[s] = self._m0 ** (-4 * a)
            elif self.numeric_fallback and name.startswith("int("):
                powers = tuple(int(t[2:]) for t in name[4:-1].split("*"))
                warnings.warn(f"numeric radial quadrature for {name}", RuntimeWarning)
                subs[s] = sympy.Float(_bundle_numeric(powers, float(self._m0)), 15)
            else:
                raise UnsupportedGraphError(f"no closed form for {name}")
        return sympy.expand(shape.subs(subs))

    def density_value(self, g: GenFeynmanGraph) -> Any:
        return self.substitute(thin_edge_shape(g))

    def value(self, g: GenFeynmanGraph) -> Any:
        if g.n_outer:
            res = gas_rules(g, self.params)
            if res.kind == "kernel":
                raise UnsupportedGraphError("distributional value (coinciding outer arguments)")
            return res.expr
        val = sympy.Integer(1)
        for comp in _components(g):
            val *= self.volume * self.density_value(comp)
        return val


def _components(g: GenFeynmanGraph) -> list[GenFeynmanGraph]:
    if g.m == 0 and not g.empties:
        return []
    groups: list[set[int]] = []
    for e in g.empties:
        vs = {v for v, _ in e}
        hit = [grp for grp in groups if grp & vs]
        for grp in hit:
            vs |= grp
            groups.remove(grp)
        groups.append(vs)
    out = []
    for grp in sorted(groups, key=min):
        order = sorted(grp)
        idx = {v: i for i, v in enumerate(order)}
        empties = [[(idx[v], l) for v, l in e] for e in g.empties if {v for v, _ in e} <= grp]
        out.append(GenFeynmanGraph(0, tuple(g.arities[v] for v in order), empties, g.distinguishable_legs))
    return out


# ------------------------------------------------------------ delta-edge rules
@dataclass
class GasValue:
    kind: str  # "constant" | "function" | "kernel"
    expr: sympy.Expr
    note: str = ""


def gas_rules(g: GenFeynmanGraph, params: GasParameters) -> GasValue:
    """Evaluate a phi^2 gas graph for moments of the charge field: edges from
    an outer vertex to an empty vertex are delta functions, so that empty
    vertex sits at the outer argument.  Coinciding outer arguments on one
    empty vertex give a distribution, reported as a kernel."""
    if any(p != 2 for p in g.arities):
        raise UnsupportedGraphError("gas rules need 2-leg interaction vertices")
    if any(len(e) % 2 for e in g.empties):
        return GasValue("constant", sympy.Integer(0), "odd empty vertex")
    xs = sympy.symbols(f"x1:{g.n_outer + 1}")
    net = thin_network_of(g) if g.m or g.n_outer else ThinNetwork(set(), [], set())
    # outer vertex -> empty node
    node_of = {}
    for c, e in enumerate(g.empties):
        for v, l in e:
            if v == -1:
                node_of[l] = c
    unit = GasParameters(params.beta, params.z, params.sigma, params.c, 1, params.m0)
    val = prod((params.gas_coupling(len(e)) for e in g.empties), start=sympy.Integer(1))
    kind = "function"
    pos: dict[int, sympy.Expr] = {}
    for i, c in sorted(node_of.items()):
        if c in pos:
            val *= sympy.DiracDelta(xs[i] - pos[c])
            kind = "kernel"
        else:
            pos[c] = xs[i]
    red = reduce_network(ThinNetwork(set(range(len(g.empties))), net.edges, set(node_of.values())))
    for kind_f, arg in red.factors:
        if kind_f == "ring":
            val *= ring_integral_value(arg, unit)
        elif len(arg) == 2:
            val *= ring_integral_value(sum(arg), unit)
        elif len(arg) == 1:
            val *= sympy.sympify(params.m0) ** (-4 * arg[0])
        else:
            val *= _bundle_symbol(arg)
    for a, b, p in red.remainder.edges:
        if a in pos and b in pos:
            val *= sympy.Function(f"gt{p}")(pos[a] - pos[b])
        else:
            raise UnsupportedGraphError("graph has an unreduced internal structure")
    if not g.n_outer:
        kind = "constant"
    return GasValue(kind, val)


# ------------------------------------------------------------ charged gas catalogue
# Density values in the display symbols, keyed by the catalogue number, and
# the multiplicities printed alongside them in the standard table.
CATALOGUE: dict[int, tuple[int, int, sympy.Expr]] = {
    1: (1, 1, c_symbol(2) * gt_symbol(1)),
    2: (2, 1, c_symbol(4) * gt_symbol(1) ** 2),
    3: (2, 2, c_symbol(2) ** 2 * gt_symbol(2)),
    4: (3, 1, c_symbol(6) * gt_symbol(1) ** 3),
    5: (3, 12, c_symbol(4) * c_symbol(2) * gt_symbol(2) * gt_symbol(1)),
    6: (3, 8, c_symbol(2) ** 3 * gt_symbol(3)),
    7: (4, 1, c_symbol(8) * gt_symbol(1) ** 4),
    8: (4, 24, c_symbol(4) ** 2 * gt_symbol(2) * gt_symbol(1) ** 2),
    9: (4, 24, c_symbol(6) * c_symbol(2) * gt_symbol(2) * gt_symbol(1) ** 2),
    10: (4, 8, c_symbol(4) ** 2 * QUARTIC),
    11: (4, 48, c_symbol(4) * c_symbol(2) ** 2 * gt_symbol(2) ** 2),
    12: (4, 96, c_symbol(2) ** 2 * c_symbol(4) * gt_symbol(3) * gt_symbol(1)),
    13: (4, 48, c_symbol(2) ** 4 * gt_symbol(4)),
}

SECOND_KIND = {1, 2, 4, 5, 7, 8, 9, 12}


def _printed_reference() -> dict[int, list[sympy.Expr]]:
    """Terms of the published fourth-order equation of state, one list per
    order, each term already multiplied by its order prefactor."""
    z, s, c, m = sympy.symbols("z sigma c m0", positive=True)
    pi = sympy.pi
    S = s ** 2 + z * c ** 2 / 2
    R = sympy.Rational
    return {
        1: [-S / (4 * m ** 2 * pi)],
        2: [R(1, 2) * z * c ** 4 / (32 * m ** 4 * pi ** 2), R(1, 2) * S ** 2 / (6 * m ** 6 * pi)],
        3: [-R(1, 6) * z * c ** 6 / (128 * m ** 6 * pi ** 3),
            -R(1, 6) * S * z * c ** 4 / (8 * m ** 8 * pi ** 2),
            -R(1, 6) * 2 * S ** 3 / (5 * m ** 10 * pi)],
        4: [R(1, 24) * z * c ** 8 / (512 * m ** 8 * pi ** 4),
            R(1, 24) * z ** 2 * c ** 8 / (32 * m ** 10 * pi ** 3),
            R(1, 24) * S * z * c ** 6 / (16 * m ** 10 * pi ** 3),
            R(1, 24) * z ** 2 * c ** 8 / (32 * m ** 6 * pi ** 3),
            R(1, 24) * S ** 2 * z * c ** 4 / (6 * m ** 12 * pi ** 2),
            R(1, 24) * 3 * S ** 2 * z * c ** 4 / (10 * m ** 12 * pi ** 2),
            R(1, 24) * 12 * S ** 4 / (7 * m ** 14 * pi)],
    }


PRINTED_REFERENCE = _printed_reference()
# catalogue number of each printed term, in printed order
PRINTED_ORDER = {1: [1], 2: [2, 3], 3: [4, 5, 6], 4: [7, 8, 9, 10, 11, 12, 13]}
FLAGGED = {
    10: "printed term uses int gtilde_1^4 = m0^-6/(64 pi^3); the integral is m0^-10 (106 - 63 zeta(3))/(16384 pi^3)",
    12: "printed coefficient 3/10; exhaustive enumeration gives multiplicity 96 and coefficient 3/5",
}


def gas_graph_classes(m: int) -> list[dict[str, Any]]:
    """Topological classes of connected phi^2 vacuum graphs with even empty
    vertices at order m, matched against the catalogue."""
    out = []
    for cls in classify(enumerate_graphs([2] * m, 0, connected=True, even_only=True)):
        shape = thin_edge_shape(cls.representative)
        number = next((k for k, (mm, _, sh) in CATALOGUE.items() if mm == m and sympy.simplify(sh - shape) == 0), None)
        out.append({
            "number": number,
            "order": m,
            "multiplicity": cls.multiplicity,
            "printed_multiplicity": CATALOGUE[number][1] if number else None,
            "shape": shape,
            "second_kind": has_second_kind_self_contraction(cls.representative),
            "canonical_key": cls.canonical_key,
            "representative": cls.representative,
        })
    out.sort(key=lambda d: (d["number"] is None, d["number"] or 0))
    return out


@dataclass
class PressureTerm:
    order: int
    number: int | None
    multiplicity: int
    shape: sympy.Expr
    coefficient: sympy.Expr  # contribution to p at lambda2 = beta = 1
    printed: sympy.Expr | None
    matches_printed: bool | None
    note: str = ""


@dataclass
class PressureReport:
    params: GasParameters
    terms: list[PressureTerm]
    numeric: bool = False
    quartic: str = "exact"

    def order_coefficient(self, m: int) -> sympy.Expr:
        return sympy.expand(sum((t.coefficient for t in self.terms if t.order == m), sympy.Integer(0)))

    def pressure(self) -> sympy.Expr:
        p = self.params
        lam, beta = sympy.sympify(p.lambda2), sympy.sympify(p.beta)
        orders = sorted({t.order for t in self.terms})
        return sum((self.order_coefficient(m) * lam ** m * beta ** (m - 1) for m in orders), sympy.Integer(0))


def pressure_series(params: GasParameters | None = None, order: int = 4, *, numeric_fallback: bool = True,
                    quartic: str = "exact") -> PressureReport:
    """Coefficients of lambda2^m beta^(m-1) in the pressure of the charged gas.

    The free energy density has coefficients (-1)^m / m! * sum_classes u * V'
    in the variable beta*lambda2; dividing by beta gives the pressure."""
    params = params or GasParameters.symbolic()
    if order < 1:
        raise ValueError("order must be >= 1")
    numeric = order > MAX_ORDER_GAS
    if numeric and not numeric_fallback:
        raise OrderCapError(f"closed-form mode is limited to order {MAX_ORDER_GAS}")
    if numeric:
        warnings.warn(f"order {order} > {MAX_ORDER_GAS}: non-ring integrals are evaluated numerically", RuntimeWarning)
    rules = ThinEdgeGasRules(params, numeric_fallback=numeric, quartic=quartic)
    z, s, c, m0 = sympy.symbols("z sigma c m0", positive=True)
    ref_subs = {z: params.z, s: params.sigma, c: params.c, m0: params.m0}
    terms: list[PressureTerm] = []
    for m in range(1, order + 1):
        classes = gas_graph_classes(m) if m <= MAX_ORDER_GAS else [
            {"number": None, "multiplicity": cl.multiplicity, "shape": thin_edge_shape(cl.representative)}
            for cl in classify(enumerate_graphs([2] * m, 0, connected=True, even_only=True))
        ]
        for info in classes:
            val = rules.substitute(info["shape"])
            coef = sympy.expand(sympy.Rational((-1) ** m * info["multiplicity"], factorial(m)) * val)
            printed = None
            match = None
            note = ""
            num = info["number"]
            if num is not None and m in PRINTED_ORDER:
                printed = sympy.expand(PRINTED_REFERENCE[m][PRINTED_ORDER[m].index(num)].subs(ref_subs))
                match = sympy.simplify(printed - coef) == 0
                if num in FLAGGED and not (num == 10 and quartic == "printed"):
                    note = FLAGGED[num]
            terms.append(PressureTerm(m, num, info["multiplicity"], info["shape"], coef, printed, match, note))
    return PressureReport(params, terms, numeric, quartic)


# ------------------------------------------------------------ counterterm
@dataclass
class CountertermReport:
    order: int
    divergent_terms: int
    paired: int
    residue: dict[tuple, sympy.Expr]

    @property
    def ok(self) -> bool:
        return not self.residue


def counterterm_cancellation(order: int, *, wick: bool = False) -> CountertermReport:
    """One-species phi^2 gas (c_n = z c^n) with the linear counterterm.

    Each loop at a 2-leg vertex contributes the formal symbol G = gtilde_1(0);
    each counterterm vertex contributes lambda_1 * int g = -c G.  Everything
    else is kept as a formal symbol per reduced (loop- and counterterm-free)
    thin-edge structure.  The report lists structures whose G-dependent
    coefficient does not vanish."""
    z, c, G = sympy.symbols("z c G", positive=True)
    lam1_int = -c * G
    acc: dict[tuple, sympy.Expr] = {}
    terms_by_graph: dict[tuple, sympy.Expr] = {}
    divergent = 0
    for m in range(1, order + 1):
        for types in product((1, 2), repeat=m):
            for g in enumerate_graphs(types, 0, connected=True, wick=wick):
                where = {}
                for ci, e in enumerate(g.empties):
                    for ep in e:
                        where[ep] = ci
                loops = 0
                n_ct = 0
                edges = []
                for v, p in enumerate(types):
                    if p == 1:
                        n_ct += 1
                    else:
                        a, b = where[(v, 0)], where[(v, 1)]
                        if a == b:
                            loops += 1
                        else:
                            edges.append((min(a, b), max(a, b), 1))
                key = _multigraph_key(set(range(len(g.empties))), edges)
                w = sympy.Rational((-1) ** m, factorial(m))
                empt = prod((z * c ** len(e) for e in g.empties), start=sympy.Integer(1))
                term = w * empt * G ** loops * lam1_int ** n_ct
                if loops or n_ct:
                    divergent += 1
                acc[key] = acc.get(key, 0) + term
                # explicit partner: first loop vertex <-> counterterm on the same empty vertex
                terms_by_graph[(types, g)] = term
    paired = 0
    for (types, g), term in terms_by_graph.items():
        partner = _counterterm_partner(types, g)
        if partner is not None and sympy.expand(terms_by_graph.get(partner, 0) + term) == 0:
            paired += 1
    residue = {}
    for key, expr in acc.items():
        poly = sympy.Poly(sympy.expand(expr), G)
        bad = sum((coef * G ** k[0] for k, coef in zip(poly.monoms(), poly.coeffs()) if k[0] > 0), sympy.Integer(0))
        if bad != 0:
            residue[key] = bad
    return CountertermReport(order, divergent, paired, residue)


def _counterterm_partner(types: tuple[int, ...], g: GenFeynmanGraph):
    """Swap the lowest-index loop vertex for a counterterm vertex (or back)."""
    where = {}
    for ci, e in enumerate(g.empties):
        for ep in e:
            where[ep] = ci
    for v, p in enumerate(types):
        if p == 2 and where[(v, 0)] == where[(v, 1)]:
            tgt = where[(v, 0)]
            new_types = types[:v] + (1,) + types[v + 1:]
            empties = []
            for ci, e in enumerate(g.empties):
                e2 = [ep for ep in e if ep[0] != v]
                if ci == tgt:
                    e2.append((v, 0))
                empties.append(e2)
            return new_types, GenFeynmanGraph(0, new_types, empties)
        if p == 1:
            tgt = where[(v, 0)]
            new_types = types[:v] + (2,) + types[v + 1:]
            empties = []
            for ci, e in enumerate(g.empties):
                e2 = [ep for ep in e if ep[0] != v]
                if ci == tgt:
                    e2 += [(v, 0), (v, 1)]
                empties.append(e2)
            return new_types, GenFeynmanGraph(0, new_types, empties)
    return None
