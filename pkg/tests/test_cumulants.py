import json
import random
from fractions import Fraction
from itertools import combinations_with_replacement

import pytest
from hypothesis import given, settings, strategies as st

from genfeyn.cumulants import (
    CumulantTable,
    IncompleteTableError,
    MomentTable,
    block_truncated_moment,
    cumulant_table_from_moments,
    cumulants_to_moments,
    dump_table,
    load_table,
    load_table_file,
    moment_table_from_cumulants,
    moments_to_cumulants,
    wick_monomial,
    wick_pairing_moment,
    wick_product_moment,
)

from oracles import cumulant_from_moments, moment_from_cumulants, wick_oracle


def rand_table(cls, sites, size, rnd):
    return cls({k: Fraction(rnd.randint(-7, 7), rnd.randint(1, 5))
                for n in range(1, size + 1) for k in combinations_with_replacement(range(sites), n)})


def test_against_partition_oracles(rnd):
    c = rand_table(CumulantTable, 3, 5, rnd)
    m = rand_table(MomentTable, 3, 5, rnd)
    for n in range(1, 6):
        for J in combinations_with_replacement(range(3), n):
            assert cumulants_to_moments(c, J) == moment_from_cumulants(lambda k: c[k], list(J))
            assert moments_to_cumulants(m, J) == cumulant_from_moments(lambda k: m[k], list(J))


def test_small_cases():
    m = MomentTable({(1,): Fraction(1, 2), (2,): Fraction(1, 3), (1, 2): Fraction(1)})
    assert moments_to_cumulants(m, (1, 2)) == Fraction(5, 6)
    assert moments_to_cumulants(m, ()) == 0
    c = CumulantTable({(1,): 2, (1, 1): 3})
    assert cumulants_to_moments(c, (1, 1)) == 7
    assert cumulants_to_moments(c, ()) == 1


def test_gaussian_higher_cumulants_vanish():
    # centred Gaussian moments: sum over pairings of covariances
    cov = {(0, 0): 2, (0, 1): 1, (1, 1): 3, (0, 2): Fraction(1, 2), (1, 2): 0, (2, 2): 1}
    kappa = lambda k: cov.get(tuple(sorted(k)), 0) if len(k) == 2 else 0
    mom = MomentTable(rule=lambda k: moment_from_cumulants(kappa, list(k)))
    for J in combinations_with_replacement(range(3), 4):
        assert moments_to_cumulants(mom, J) == 0
    for J in combinations_with_replacement(range(3), 3):
        assert moments_to_cumulants(mom, J) == 0


def test_incomplete_table_names_missing():
    m = MomentTable({(1, 2): 1})
    with pytest.raises(IncompleteTableError) as exc:
        moments_to_cumulants(m, (1, 2))
    assert set(exc.value.missing) == {(1,), (2,)}


def test_round_trip_tables(rnd):
    keys = [k for n in range(1, 5) for k in combinations_with_replacement(range(2), n)]
    m = rand_table(MomentTable, 2, 4, rnd)
    c = cumulant_table_from_moments(m, keys)
    back = moment_table_from_cumulants(c, keys)
    assert all(back[k] == m[k] for k in keys)


def test_load_dump(tmp_path):
    doc = {"kind": "cumulants", "entries": [[[1], "1/3"], [[1, 1], 2]]}
    kind, t = load_table(doc)
    assert kind == "cumulants" and t[(1,)] == Fraction(1, 3) and t[(1, 1)] == 2
    p = tmp_path / "t.json"
    p.write_text(json.dumps(dump_table(kind, t)))
    kind2, t2 = load_table_file(str(p))
    assert kind2 == kind and t2.items() == t.items()
    with pytest.raises(ValueError):
        load_table({"kind": "other", "entries": []})
    with pytest.raises(ValueError):
        load_table({"kind": "moments", "entries": [[[1], 0.5]]})


def test_wick_single_site():
    c = CumulantTable({(5,): Fraction(1, 3), (5, 5): 2})
    p = wick_monomial([5], c)
    assert p.render() == "phi(5) - 1/3"
    assert p.expectation_with([], c) == 0


def test_wick_two_sites_hermite():
    # :x x: = x^2 - 2<x> x - <x x> + 2 <x>^2
    c = CumulantTable({(5,): Fraction(1, 3), (5, 5): 2})
    terms = dict(wick_monomial([5, 5], c).terms())
    assert terms == {(5, 5): 1, (5,): Fraction(-2, 3), (): Fraction(-17, 9)}


def test_wick_expectations_against_oracle(rnd):
    c = rand_table(CumulantTable, 3, 6, rnd)
    for _ in range(30):
        X = [rnd.randrange(3) for _ in range(rnd.randint(1, 3))]
        Y = [rnd.randrange(3) for _ in range(rnd.randint(0, 3))]
        expect = wick_oracle([X], Y, lambda k: c[k])
        assert wick_monomial(X, c).expectation_with(Y, c) == expect
        if Y:
            # equivalently the moment truncated w.r.t. the blocks {x_1}, ..., {x_k}, Y
            assert block_truncated_moment([[x] for x in X] + [Y], c) == expect


@pytest.mark.parametrize("shape", [([2], [1]), ([1, 1], [2]), ([2, 2], []), ([3], [1, 1]), ([1, 2], [1])])
def test_pairing_vs_product(shape, rnd):
    c = rand_table(CumulantTable, 2, 6, rnd)
    bsz, xn = shape
    for _ in range(3):
        blocks = [[rnd.randrange(2) for _ in range(k)] for k in bsz]
        X = [rnd.randrange(2) for _ in range(sum(xn))]
        a = wick_pairing_moment(blocks, X, c)
        assert a == wick_product_moment(blocks, X, c)
        assert a == wick_oracle(blocks, X, lambda k: c[k])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=5), st.integers(0, 10_000))
def test_inversion_property(J, seed):
    rnd = random.Random(seed)
    m = rand_table(MomentTable, 3, len(J), rnd)
    c = CumulantTable({k: moments_to_cumulants(m, k) for k in m.keys()})
    assert cumulants_to_moments(c, J) == m[J]
