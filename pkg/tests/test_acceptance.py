"""Acceptance suite: one PASS/FAIL line per criterion, printed even under
output capture.  Run with ``pytest tests/test_acceptance.py -v``."""
import math
import random
import time
from fractions import Fraction
from itertools import combinations, combinations_with_replacement, product

import pytest
import sympy

from genfeyn import formal_series as fs
from genfeyn.cumulants import (
    CumulantTable,
    MomentTable,
    cumulants_to_moments,
    moments_to_cumulants,
    wick_pairing_moment,
    wick_product_moment,
)
from genfeyn.graphs import classify, enumerate_graphs
from genfeyn.levy_models import (
    GasParameters,
    PropagatorSpec,
    gaussian_model,
    gaussian_reduce,
    one_species_model,
    quartic_integral_value,
    ring_integral_value,
)
from genfeyn.numeric_eval import (
    QuadratureConfig,
    classical_network,
    clustering_decay_probe,
    evaluate_graph_numeric,
    evaluate_network,
    quartic_integral_mc,
    ring_integral_quadrature,
)
from genfeyn.series_engine import (
    CATALOGUE,
    InteractionPolynomial,
    SiteRules,
    ThinEdgeGasRules,
    counterterm_cancellation,
    free_energy_series,
    gas_graph_classes,
    moment_series,
    pressure_series,
    schwinger_covering,
)
from oracles import isomorphism_classes

UNIT = GasParameters(1, 1, 0, 1, 1, 1)

# multiplicities and value shapes as printed in the standard table of
# connected phi^2 vacuum graphs, catalogue order
PRINTED_U = {1: [1], 2: [1, 2], 3: [1, 12, 8], 4: [1, 24, 24, 8, 48, 96, 48]}


@pytest.fixture
def report(capsys):
    def emit(criterion, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'}  criterion {criterion}: {title} | {detail}")
    return emit


def rational(rnd, num=9, den=9):
    return Fraction(rnd.randint(-num, num), rnd.randint(1, den))


# ---------------------------------------------------------------- 1
def test_criterion_1_graph_table(report):
    t0 = time.perf_counter()
    counts, mults, shapes_ok = [], {}, True
    for m in range(1, 5):
        classes = gas_graph_classes(m)
        counts.append(len(classes))
        mults[m] = [c["multiplicity"] for c in classes]
        shapes_ok &= all(c["number"] is not None and sympy.simplify(c["shape"] - CATALOGUE[c["number"]][2]) == 0
                         for c in classes)
    elapsed = time.perf_counter() - t0
    # independent labelled count: all labelled graphs, grouped by VF2 isomorphism
    labelled = [g for g in enumerate_graphs([2] * 4, 0, connected=True, even_only=True)]
    brute = isomorphism_classes(labelled)
    ok = (counts == [1, 2, 3, 7] and mults == PRINTED_U and shapes_ok
          and brute == sorted(PRINTED_U[4]) and elapsed < 10)
    report(1, "graph table m=1..4", ok,
           f"classes {counts}, u {mults[4]}, shapes {'match' if shapes_ok else 'DIFFER'}, "
           f"VF2 sizes {brute}, {elapsed:.1f}s (< 10s)")
    assert counts == [1, 2, 3, 7]
    assert mults == PRINTED_U and shapes_ok
    assert brute == sorted(PRINTED_U[4])
    assert elapsed < 10


# ---------------------------------------------------------------- 2
def test_criterion_2_equation_of_state(report):
    t0 = time.perf_counter()
    rep = pressure_series(order=4, quartic="printed")
    elapsed = time.perf_counter() - t0
    low = [t for t in rep.terms if t.order <= 3]
    four = [t for t in rep.terms if t.order == 4]
    matched4 = [t.number for t in four if t.matches_printed]
    t12 = next(t for t in four if t.number == 12)
    # brute-force coefficient: VF2 class size times the value, over 4!
    u12 = max(isomorphism_classes(list(enumerate_graphs([2] * 4, 0, connected=True, even_only=True))))
    brute = sympy.Rational(u12, 24) * ThinEdgeGasRules(rep.params).substitute(CATALOGUE[12][2])
    ratio = sympy.simplify(t12.coefficient / t12.printed)
    exact_rep = pressure_series(order=4)
    flagged10 = next(t for t in exact_rep.terms if t.number == 10).note
    ok = (all(t.matches_printed for t in low) and len(matched4) == 6 and 12 not in matched4
          and sympy.simplify(t12.coefficient - brute) == 0 and ratio == 2 and "3/5" in t12.note and elapsed < 30)
    report(2, "equation of state to order 4", ok,
           f"orders 1-3 {sum(bool(t.matches_printed) for t in low)}/{len(low)}, order 4 {len(matched4)}/7 "
           f"(differs: graph 12, computed/published = {ratio}, annotated), {elapsed:.1f}s (< 30s); "
           f"with the exact quartic graph 10 is also annotated")
    assert all(t.matches_printed for t in low)
    assert sorted(matched4) == [7, 8, 9, 10, 11, 13]
    assert sympy.simplify(t12.coefficient - brute) == 0 and ratio == 2 and "3/5" in t12.note
    assert flagged10
    assert elapsed < 30


# ---------------------------------------------------------------- 3
def test_criterion_3_closed_form_integrals(report):
    t0 = time.perf_counter()
    lam, m0 = sympy.symbols("lambda2 m0", positive=True)
    sym = GasParameters(1, 1, 0, 1, lam, m0)
    symbolic = all(sympy.simplify(ring_integral_value(n, sym) - lam ** n * m0 ** (2 - 4 * n)
                                  / (4 * sympy.pi * (2 * n - 1))) == 0 for n in range(1, 5))
    quad_err = max(abs(ring_integral_quadrature(n) / float(ring_integral_value(n, UNIT)) - 1) for n in range(1, 5))
    value = quartic_integral_value(UNIT)
    mc = quartic_integral_mc(samples=1_000_000, seed=2024)
    mc_err = abs(mc.value / float(value) - 1)
    published = 1 / (64 * sympy.pi ** 3)
    equals_published = sympy.simplify(value - published) == 0
    elapsed = time.perf_counter() - t0
    ok = symbolic and quad_err <= 1e-8 and mc_err <= 1e-2 and equals_published and elapsed < 120
    report(3, "closed-form integrals", ok,
           f"rings symbolic {'ok' if symbolic else 'DIFFER'}, quadrature max rel {quad_err:.1e} (<= 1e-8), "
           f"quartic vs MC(1e6) {mc_err:.2e} (<= 1e-2), quartic = 1/(64 pi^3): "
           f"{'yes' if equals_published else 'NO, computed %.6e vs %.6e (ratio %.4f)' % (float(value), float(published), float(published / value))}"
           f", {elapsed:.1f}s (< 120s)")
    assert symbolic and quad_err <= 1e-8
    assert mc_err <= 1e-2
    assert elapsed < 120
    # unattainable together with the Monte Carlo agreement above
    assert equals_published, "int gtilde_1^4 = (106 - 63 zeta(3))/(16384 pi^3), not 1/(64 pi^3)"


# ---------------------------------------------------------------- 4
def test_criterion_4_moment_cumulant_inversion(report):
    rnd = random.Random(404)
    keys = [k for r in range(1, 7) for k in combinations(range(6), r)]
    bad = 0
    for _ in range(100):
        m = MomentTable({k: rational(rnd) for k in keys})
        c = CumulantTable({k: moments_to_cumulants(m, k) for k in keys})
        bad += sum(cumulants_to_moments(c, k) != m[k] for k in keys)
        c2 = CumulantTable({k: rational(rnd) for k in keys})
        m2 = MomentTable({k: cumulants_to_moments(c2, k) for k in keys})
        bad += sum(moments_to_cumulants(m2, k) != c2[k] for k in keys)
    report(4, "moment/cumulant round trip", bad == 0,
           f"100 tables x {len(keys)} subsets (size <= 6), both directions, {bad} mismatches")
    assert bad == 0


# ---------------------------------------------------------------- 5
def _toy(sites, size, rnd):
    return CumulantTable({k: rational(rnd, 5, 6) for r in range(1, size + 1)
                          for k in combinations_with_replacement(range(sites), r)})


def test_criterion_5_linked_cluster(report):
    rnd = random.Random(505)
    names, deg = ("t0", "t1"), 6
    exp_ok = log_ok = True
    for _ in range(3):
        c = _toy(2, deg, rnd)
        keyed = [k for r in range(1, deg + 1) for k in combinations_with_replacement(range(2), r)]
        w = lambda k: math.factorial(k.count(0)) * math.factorial(k.count(1))
        K = fs.TruncatedSeries(names, deg, {(k.count(0), k.count(1)): c[k] / w(k) for k in keyed})
        M = fs.TruncatedSeries(names, deg, {(0, 0): 1, **{(k.count(0), k.count(1)): cumulants_to_moments(c, k) / w(k)
                                                          for k in keyed}})
        exp_ok &= fs.exp(K) == M
    v = InteractionPolynomial.formal([0, 1, 2])
    for _ in range(2):
        rules = SiteRules(_toy(2, 8, rnd), [0, 1])
        log_ok &= fs.log(moment_series(0, 4, v, rules).series) == free_energy_series(4, v, rules).series
    ok = exp_ok and log_ok
    report(5, "exp/log of generating series", ok,
           f"exp(K) = M to degree 6: {exp_ok}; log Z = connected sum to order 4 (formal lambda_0,1,2): {log_ok}")
    assert ok


# ---------------------------------------------------------------- 6
def _shapes(max_total=6):
    out = []
    for total in range(1, max_total + 1):
        for nx_ in range(0, total):
            rest = total - nx_

            def parts(n, top):
                if n == 0:
                    yield ()
                for k in range(min(n, top), 0, -1):
                    for p in parts(n - k, k):
                        yield (k,) + p
            out += [(p, nx_) for p in parts(rest, rest)]
    return out


def test_criterion_6_wick_pairing(report):
    rnd = random.Random(606)
    shapes = _shapes()
    bad = total = 0
    for _ in range(20):
        c = _toy(2, 6, rnd)
        for blocks_sz, nx_ in shapes:
            blocks = [[rnd.randrange(2) for _ in range(k)] for k in blocks_sz]
            X = [rnd.randrange(2) for _ in range(nx_)]
            total += 1
            bad += wick_pairing_moment(blocks, X, c) != wick_product_moment(blocks, X, c)
    report(6, "Wick pairing sum = Wick polynomial expansion", bad == 0,
           f"{len(shapes)} block shapes (total size <= 6) x 20 tables, {bad}/{total} mismatches")
    assert bad == 0


# ---------------------------------------------------------------- 7
def test_criterion_7_wick_orthogonality(report):
    rnd = random.Random(707)
    sites = (0, 1)
    gauss = CumulantTable({k: (rational(rnd) if len(k) <= 2 else 0)
                           for r in range(1, 9) for k in combinations_with_replacement(sites, r)})
    nonzero = checked = 0
    for a, b in product(range(1, 4), range(1, 6)):
        if a == b:
            continue
        for A in combinations_with_replacement(sites, a):
            for B in combinations_with_replacement(sites, b):
                checked += 1
                nonzero += wick_pairing_moment([list(A), list(B)], [], gauss) != 0
    skew = CumulantTable({(0,): 1, (1,): 2, (2,): 0, (0, 1): 1, (0, 2): 0, (1, 2): 3, (0, 0): 1, (1, 1): 1,
                          (2, 2): 1, (0, 1, 2): Fraction(1, 2)}, rule=lambda k: 0)
    cross = wick_product_moment([[0], [1, 2]], [], skew)
    ok = nonzero == 0 and cross == Fraction(1, 2)
    report(7, "Wick orthogonality across sizes", ok,
           f"Gaussian: {nonzero}/{checked} nonzero <:A::B:> with |A| != |B| (|A| <= 3, |B| <= 5); "
           f"third cumulant 1/2 gives <:x::yz:> = {cross}")
    assert ok


# ---------------------------------------------------------------- 8
def test_criterion_8_gaussian_reduction(report):
    model = gaussian_model(1.5, PropagatorSpec(2, 1, 1.0))
    pool = []
    for ar in [(2,), (4,), (1, 1), (2, 2), (1, 3), (3, 3), (2, 4), (4, 4), (1, 2, 1), (2, 2, 2)]:
        for n in (0, 2):
            gs = [g for g in enumerate_graphs(list(ar), n, connected=True) if all(len(e) == 2 for e in g.empties)]
            pool += [c.representative for c in classify(gs)]
    rnd = random.Random(2024)
    cfg = QuadratureConfig(samples=1_000_000, seed=11)
    worst, rows = 0.0, []
    for g in rnd.sample(pool, 10):
        red = gaussian_reduce(g, model)
        assert not red.zero
        pos = [(0.0, 0.0), (0.7, 0.2)][:g.n_outer]
        a = evaluate_graph_numeric(g, model, cfg, outer_positions=pos)
        b = evaluate_network(classical_network(red.graph, model, pos), cfg)
        dev = abs(a.value / b.value - 1)
        worst = max(worst, dev)
        rows.append(f"{dev:.4f}")
    ok = worst <= 1e-2
    report(8, "Gaussian reduction to classical rules", ok,
           f"10 graphs from a pool of {len(pool)}, rel. deviations [{', '.join(rows)}], worst {worst:.4f} (<= 0.01)")
    assert ok


# ---------------------------------------------------------------- 9
def test_criterion_9_counterterm(report):
    reps = [counterterm_cancellation(k) for k in (1, 2)]
    ok = all(r.ok for r in reps) and all(r.paired == r.divergent_terms for r in reps)
    report(9, "counterterm cancellation to order 2", ok,
           "; ".join(f"order {r.order}: {r.divergent_terms} G-dependent terms, residue {len(r.residue)}" for r in reps))
    assert ok


# ---------------------------------------------------------------- 10
def test_criterion_10_covering(report):
    reps = [schwinger_covering(m, n) for m in range(1, 5) for n in (1, 2) if n <= m]
    ok = all(r.ok and r.observed == {math.factorial(r.n) * math.comb(r.m, r.n)} for r in reps)
    report(10, "source-vertex covering factor n! C(m, n)", ok,
           ", ".join(f"(m={r.m},n={r.n}): {sorted(r.observed)}" for r in reps))
    assert ok


# ---------------------------------------------------------------- decay probe
def test_clustering_decay_probe(report):
    model = one_species_model(1.0, 1.0, PropagatorSpec(2, 1, 1.0))
    rates = {n: clustering_decay_probe(model, n, samples=400_000).rate for n in (2, 3, 4)}
    ok = all(r >= 0.95 for r in rates.values())
    report("decay", "clustering of truncated moments", ok,
           ", ".join(f"n={n}: rate {r:.3f} m0" for n, r in rates.items()) + " (>= 0.95 m0)")
    assert ok
