import random

import pytest

from genfeyn.graphs import (
    GenFeynmanGraph,
    GraphError,
    canonicalize,
    classify,
    enumerate_graphs,
    graph_from_key,
    has_second_kind_self_contraction,
    has_self_contraction,
    is_connected,
    is_outer_touching,
    merge_classes,
    thin_edge_multigraph,
)
from genfeyn.partitions import bell_number

from oracles import isomorphism_classes


def random_relabel(g, rnd):
    perm = list(range(g.m))
    rnd.shuffle(perm)
    legs = []
    for p in g.arities:
        lp = list(range(p))
        rnd.shuffle(lp)
        legs.append(lp)
    return g.relabel(perm, legs)


def test_validation():
    with pytest.raises(GraphError):
        GenFeynmanGraph(0, (2,), [[(0, 0)]])
    with pytest.raises(GraphError):
        GenFeynmanGraph(1, (1,), [[(0, 0), (0, 0)], [(-1, 0)]])
    with pytest.raises(GraphError):
        GenFeynmanGraph(0, (0,), [])


def test_json_round_trip():
    for g in enumerate_graphs([2, 3], 1):
        h = GenFeynmanGraph.from_json(g.to_json())
        assert h == g
    g = next(enumerate_graphs([2, 2], 0)).forget_legs()
    assert GenFeynmanGraph.from_json(g.to_json()) == g
    bad = g.to_dict()
    bad["full"][0]["id"] = 5
    with pytest.raises(GraphError):
        GenFeynmanGraph.from_dict(bad)


def test_canonical_invariance(rnd):
    pool = list(enumerate_graphs([2, 2, 3, 1], 1, connected=True))
    for _ in range(1000):
        g = rnd.choice(pool)
        assert canonicalize(random_relabel(g, rnd)) == canonicalize(g)


def test_key_round_trip():
    for cls in classify(enumerate_graphs([2, 2, 2], 0)):
        assert canonicalize(graph_from_key(cls.canonical_key)) == cls.canonical_key


@pytest.mark.parametrize("arities,n", [((2, 2, 2), 0), ((4, 4), 0), ((1, 2, 3), 1), ((2, 2), 2), ((3, 1, 1), 1)])
def test_classes_match_isomorphism_oracle(arities, n):
    graphs = list(enumerate_graphs(list(arities), n))
    ours = sorted(c.multiplicity for c in classify(graphs))
    assert ours == isomorphism_classes(graphs)
    assert sum(ours) == bell_number(n + sum(arities))


def test_merge_classes_equals_single_pass():
    graphs = list(enumerate_graphs([2, 2, 2], 0))
    half = len(graphs) // 2
    merged = merge_classes([classify(graphs[:half]), classify(graphs[half:])])
    single = classify(graphs)
    assert [(c.canonical_key, c.multiplicity) for c in merged] == [(c.canonical_key, c.multiplicity) for c in single]


def test_predicates():
    # phi^2 vertex with both legs on one empty vertex
    loop = GenFeynmanGraph(0, (2,), [[(0, 0), (0, 1)]])
    assert is_connected(loop) and has_self_contraction(loop) and has_second_kind_self_contraction(loop)
    # two phi^2 vertices joined by two 2-leg empties: a ring
    ring = GenFeynmanGraph(0, (2, 2), [[(0, 0), (1, 0)], [(0, 1), (1, 1)]])
    assert not has_self_contraction(ring) and not has_second_kind_self_contraction(ring)
    # shared 4-leg empty: not a self-contraction but second kind for each vertex
    four = GenFeynmanGraph(0, (2, 2), [[(0, 0), (0, 1), (1, 0), (1, 1)]])
    assert not has_self_contraction(four) and has_second_kind_self_contraction(four)
    with pytest.raises(GraphError):
        has_second_kind_self_contraction(GenFeynmanGraph(0, (4,), [[(0, 0), (0, 1), (0, 2), (0, 3)]]))
    two = GenFeynmanGraph(0, (1, 1), [[(0, 0)], [(1, 0)]])
    assert not is_connected(two)
    assert is_connected(GenFeynmanGraph(0, (), []))
    outer = GenFeynmanGraph(1, (1, 2), [[(-1, 0), (0, 0)], [(1, 0), (1, 1)]])
    assert not is_outer_touching(outer)
    assert is_outer_touching(GenFeynmanGraph(1, (1,), [[(-1, 0), (0, 0)]]))


def test_outer_vertices_are_not_interchangeable():
    a = GenFeynmanGraph(2, (2,), [[(-1, 0), (0, 0)], [(-1, 1)], [(0, 1)]])
    b = GenFeynmanGraph(2, (2,), [[(-1, 1), (0, 0)], [(-1, 0)], [(0, 1)]])
    assert canonicalize(a) != canonicalize(b)


def test_enumeration_filters():
    allg = list(enumerate_graphs([2, 2], 0))
    assert len(allg) == bell_number(4)
    conn = list(enumerate_graphs([2, 2], 0, connected=True))
    assert conn == [g for g in allg if is_connected(g)]
    wick = list(enumerate_graphs([2, 2], 0, wick=True))
    assert set(wick) == {g for g in allg if not has_self_contraction(g)}
    even = list(enumerate_graphs([2, 2], 0, even_only=True))
    assert set(even) == {g for g in allg if all(len(e) % 2 == 0 for e in g.empties)}
    touch = list(enumerate_graphs([2], 1, outer_touching=True))
    assert all(is_outer_touching(g) for g in touch) and len(touch) == 3


def test_gas_order2_classes():
    classes = classify(enumerate_graphs([2, 2], 0, connected=True, even_only=True))
    assert sorted(c.multiplicity for c in classes) == [1, 2]


def test_thin_edge_multigraph():
    ring = GenFeynmanGraph(1, (2, 2), [[(-1, 0), (0, 0), (1, 0)], [(0, 1), (1, 1)]])
    n, edges, outer = thin_edge_multigraph(ring)
    assert n == 2 and sorted(edges) == [(0, 1), (0, 1)] and outer == [0]
