import math
import warnings

import pytest

from genfeyn.graphs import GenFeynmanGraph
from genfeyn.levy_models import (
    GasParameters,
    PropagatorSpec,
    charged_gas_model,
    coupling_constant,
    gaussian_model,
    one_species_model,
    quartic_integral_value,
    ring_integral_value,
)
from genfeyn.numeric_eval import (
    KernelNetwork,
    NumericEvalError,
    QuadratureConfig,
    clustering_decay_probe,
    evaluate_graph_numeric,
    evaluate_network,
    quartic_integral_mc,
    ring_integral_convolution,
    ring_integral_quadrature,
)
from genfeyn.series_engine import gas_graph_classes

UNIT = GasParameters(1, 1, 0, 1, 1, 1)
SPEC = PropagatorSpec(2, 1, 1.0)


@pytest.fixture(scope="module")
def model():
    return charged_gas_model(1.0, 0.5, 1.0, SPEC)


@pytest.fixture(scope="module")
def catalogue():
    return {d["number"]: d["representative"] for m in (1, 2, 4) for d in gas_graph_classes(m)}


def within(res, exact, sigmas=5, floor=0.0):
    return abs(res.value - exact) <= sigmas * res.stderr + floor * abs(exact)


def test_config_validation():
    for bad in (dict(samples=0), dict(truncation_radius=0), dict(mode="grid"), dict(proposal="uniform")):
        with pytest.raises(NumericEvalError):
            QuadratureConfig(**bad)


def test_single_empty_vertex_is_exact(model, catalogue):
    # graph 1: c_2 * int g^2, a single two-leg loop
    res = evaluate_graph_numeric(catalogue[1], model, QuadratureConfig(samples=100_000, seed=4))
    exact = float(coupling_constant(model, 2)) * float(ring_integral_value(1, UNIT))
    assert within(res, exact)


def test_two_point_ring(model, catalogue):
    res = evaluate_graph_numeric(catalogue[3], model, QuadratureConfig(samples=200_000, seed=1))
    exact = float(coupling_constant(model, 2)) ** 2 * float(ring_integral_value(2, UNIT))
    assert res.converged
    assert abs(res.value / exact - 1) < 1e-2 and within(res, exact)


def test_quartic_graph_matches_closed_form(model, catalogue):
    res = evaluate_graph_numeric(catalogue[10], model, QuadratureConfig(samples=400_000, seed=1))
    exact = float(coupling_constant(model, 4)) ** 2 * float(quartic_integral_value(UNIT))
    assert abs(res.value / exact - 1) < 1e-2 and within(res, exact)


def test_disconnected_graph_refused(model):
    g = GenFeynmanGraph(0, (2, 2), [[(0, 0), (0, 1)], [(1, 0), (1, 1)]])
    with pytest.raises(NumericEvalError):
        evaluate_graph_numeric(g, model)


def test_unpinned_network_refused():
    net = KernelNetwork(2, [(0, 1, 1.0)], 2, 1.0)
    with pytest.raises(NumericEvalError):
        evaluate_network(net, QuadratureConfig(samples=100))


def test_reproducible_and_thread_independent(model, catalogue, monkeypatch):
    cfg = QuadratureConfig(samples=40_000, seed=99, batches=8)
    a = evaluate_graph_numeric(catalogue[3], model, cfg)
    b = evaluate_graph_numeric(catalogue[3], model, cfg)
    monkeypatch.setenv("GENFEYN_WORKERS", "2")
    c = evaluate_graph_numeric(catalogue[3], model, cfg)
    assert a.value == b.value == c.value and a.stderr == c.stderr
    d = evaluate_graph_numeric(catalogue[3], model, QuadratureConfig(samples=40_000, seed=100, batches=8))
    assert d.value != a.value


def test_quasi_monte_carlo_mode(model, catalogue):
    cfg = QuadratureConfig(mode="deterministic-grid", samples=2 ** 16, batches=16, seed=3)
    res = evaluate_graph_numeric(catalogue[3], model, cfg)
    exact = float(coupling_constant(model, 2)) ** 2 * float(ring_integral_value(2, UNIT))
    assert abs(res.value / exact - 1) < 1e-2


def test_exponential_envelope(model, catalogue):
    cfg = QuadratureConfig(samples=400_000, seed=5, proposal="exponential", target_rel_error=0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = evaluate_graph_numeric(catalogue[3], model, cfg)
    exact = float(coupling_constant(model, 2)) ** 2 * float(ring_integral_value(2, UNIT))
    assert abs(res.value / exact - 1) < 0.05


def test_truncation_radius_monotone(model, catalogue):
    vals = [evaluate_graph_numeric(catalogue[3], model,
                                   QuadratureConfig(samples=50_000, seed=8, truncation_radius=R,
                                                    target_rel_error=1.0)).value
            for R in (0.5, 1.0, 2.0, 4.0, math.inf)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[0] < 0.9 * vals[-1]


def test_unmet_target_warns(model, catalogue):
    with pytest.warns(RuntimeWarning):
        res = evaluate_graph_numeric(catalogue[10], model, QuadratureConfig(samples=2_000, target_rel_error=1e-4))
    assert not res.converged


def test_ring_quadrature_oracles():
    for n in range(1, 5):
        exact = float(ring_integral_value(n, UNIT))
        assert ring_integral_quadrature(n) == pytest.approx(exact, rel=1e-8)
    # different mass and coupling
    p = GasParameters(1, 1, 0, 1, 0.7, 1.3)
    assert ring_integral_quadrature(3, 0.7, 1.3) == pytest.approx(float(ring_integral_value(3, p)), rel=1e-8)
    for n in (1, 2, 3):
        assert ring_integral_convolution(n) == pytest.approx(float(ring_integral_value(n, UNIT)), rel=1e-6)


def test_quartic_monte_carlo():
    res = quartic_integral_mc(samples=400_000, seed=2024)
    exact = float(quartic_integral_value(UNIT))
    assert abs(res.value / exact - 1) < 2e-2 and within(res, exact)
    # lambda2^4 m0^-10 scaling
    res2 = quartic_integral_mc(lambda2=2.0, m0=1.5, samples=400_000, seed=2024)
    assert res2.value == pytest.approx(res.value * 2 ** 4 / 1.5 ** 10, rel=1e-9)
    p = GasParameters(1, 1, 0, 1, 2.0, 1.5)
    assert res2.value == pytest.approx(float(quartic_integral_value(p)), rel=2e-2)


def test_quartic_mass_dependence_position_space(catalogue):
    heavy = charged_gas_model(1.0, 0.0, 1.0, PropagatorSpec(2, 1, 1.5))
    res = evaluate_graph_numeric(catalogue[10], heavy, QuadratureConfig(samples=400_000, seed=6))
    c4 = float(coupling_constant(heavy, 4))
    exact = c4 ** 2 * float(quartic_integral_value(GasParameters(1, 1, 0, 1, 1, 1.5)))
    assert abs(res.value / exact - 1) < 2e-2


def test_clustering_two_point_rate():
    est = clustering_decay_probe(one_species_model(1.0, 1.0, SPEC), 2, samples=200_000)
    assert 0.95 <= est.rate <= 1.05
    est_g = clustering_decay_probe(gaussian_model(1.0, SPEC), 2, samples=200_000)
    assert est_g.rate == pytest.approx(est.rate, abs=1e-9)


def test_clustering_four_point_and_gaussian():
    est = clustering_decay_probe(one_species_model(1.0, 1.0, SPEC), 4, samples=200_000,
                                 directions=[[1, 0], [0.6, 0.8]])
    assert len(est.rates) == 2 and est.rate >= 0.95
    g = clustering_decay_probe(gaussian_model(1.0, SPEC), 3)
    assert g.rate == math.inf and "vanishes" in g.note
