"""Numerical evaluation of graph values with error estimates.

A graph is turned into a *kernel network*: nodes are integration points,
edges carry Bessel-potential kernels ``G_alpha``.  The default estimator
samples positions along a spanning forest rooted at the pinned nodes, each
tree edge drawn exactly from the normalised kernel (Gamma subordination of a
Gaussian), so the weight is the product of the tree-edge masses times the
non-tree kernels.  Logarithmic singularities on tree edges are absorbed by
the proposal; the remaining ones are square integrable.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .graphs import GenFeynmanGraph, is_connected
from .levy_models import (
    LevyModel,
    PropagatorSpec,
    bessel_kernel,
    coupling_constant,
    gtilde_numeric,
    sample_kernel_displacements,
    truncated_star_moment,
)

WORKERS_ENV = "GENFEYN_WORKERS"


class NumericEvalError(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    mode: str = "monte-carlo"  # or "deterministic-grid"
    samples: int = 200_000
    seed: int = 12345
    truncation_radius: float = math.inf  # in units of 1/m0
    target_rel_error: float = 1e-2
    batches: int = 16
    proposal: str = "propagator"  # or "exponential"
    envelope_rate: float | None = None

    def __post_init__(self) -> None:
        if self.samples <= 0 or self.batches <= 0:
            raise NumericEvalError("samples and batches must be positive")
        if not self.truncation_radius > 0:
            raise NumericEvalError("truncation radius must be positive")
        if self.mode not in ("monte-carlo", "deterministic-grid"):
            raise NumericEvalError(f"unknown mode {self.mode!r}")
        if self.proposal not in ("propagator", "exponential"):
            raise NumericEvalError(f"unknown proposal {self.proposal!r}")


@dataclass
class NumericResult:
    value: float
    stderr: float
    samples: int
    seed: int
    converged: bool = True

    def as_record(self) -> dict[str, Any]:
        return {"value": self.value, "stderr": self.stderr, "samples": self.samples, "seed": self.seed}


@dataclass
class KernelNetwork:
    """Integral over the free nodes of coefficient * prod_edges G_(alpha_e)(x_a - x_b)."""

    n_nodes: int
    edges: list[tuple[int, int, float]]  # (a, b, alpha)
    d: int
    m0: float
    pinned: dict[int, np.ndarray] = field(default_factory=dict)
    coefficient: float = 1.0
    constant_factors: float = 1.0  # loops evaluated at the origin


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _placement(net: KernelNetwork) -> tuple[list[tuple[int, list[int]]], list[int]]:
    """BFS order of the free nodes, each with the edges back to nodes placed
    before it, and the edges joining two pinned nodes."""
    if not net.pinned:
        raise NumericEvalError("at least one node must be pinned")
    adj: dict[int, list[int]] = {i: [] for i in range(net.n_nodes)}
    for k, (a, b, _) in enumerate(net.edges):
        adj[a].append(b)
        adj[b].append(a)
    rank = {v: i for i, v in enumerate(sorted(net.pinned))}
    queue = sorted(net.pinned)
    while queue:
        u = queue.pop(0)
        for w in adj[u]:
            if w not in rank:
                rank[w] = len(rank)
                queue.append(w)
    if len(rank) != net.n_nodes:
        raise NumericEvalError("integrand does not decay: some nodes are not tied to a pinned point")
    back: dict[int, list[int]] = {v: [] for v in rank if v not in net.pinned}
    fixed = []
    for k, (a, b, _) in enumerate(net.edges):
        late = a if rank[a] > rank[b] else b
        if late in net.pinned:
            fixed.append(k)
        else:
            back[late].append(k)
    order = sorted(back, key=rank.get)
    return [(v, back[v]) for v in order], fixed


def _batch(net: KernelNetwork, cfg: QuadratureConfig, order, fixed, n: int, seed_seq) -> np.ndarray:
    """One batch of importance weights.  A free node is drawn from an equal
    mixture of the normalised kernels of its edges to already placed nodes and
    weighted by the product of those kernels over the mixture density."""
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    m0, d = net.m0, net.d
    pos = np.zeros((net.n_nodes, n, d))
    for i, x in net.pinned.items():
        pos[i] = np.asarray(x, dtype=float)
    w = np.full(n, net.coefficient * net.constant_factors, dtype=float)
    if cfg.mode == "deterministic-grid":
        dim = len(order) * (d + 2)
        u_all = qmc.Sobol(dim, scramble=True, seed=rng).random(n)
    surf = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    for j, (v, ks) in enumerate(order):
        other = [net.edges[k][0] if net.edges[k][1] == v else net.edges[k][1] for k in ks]
        alphas = [net.edges[k][2] for k in ks]
        if cfg.mode == "deterministic-grid":
            u = u_all[:, j * (d + 2):(j + 1) * (d + 2)]
            pick, us = np.minimum((u[:, 0] * len(ks)).astype(int), len(ks) - 1), u[:, 1:]
        else:
            pick, us = rng.integers(0, len(ks), size=n), None
        if cfg.proposal == "propagator":
            for c in range(len(ks)):
                sel = np.flatnonzero(pick == c)
                spec = PropagatorSpec(d, alphas[c], m0)
                step = sample_kernel_displacements(spec, len(sel), rng, None if us is None else us[sel])
                pos[v][sel] = pos[other[c]][sel] + step
            q = np.zeros(n)
            for c in range(len(ks)):
                spec = PropagatorSpec(d, alphas[c], m0)
                r = np.linalg.norm(pos[v] - pos[other[c]], axis=1)
                q += bessel_kernel(r, d, alphas[c], m0) / spec.integral
            q /= len(ks)
        else:
            rate = cfg.envelope_rate or m0
            r = rng.gamma(d, 1.0 / rate, size=n)
            dirs = rng.standard_normal((n, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            pos[v] = pos[other[0]] + dirs * r[:, None]
            q = rate ** d * np.exp(-rate * r) / (math.gamma(d) * surf)
        for c in range(len(ks)):
            r = np.linalg.norm(pos[v] - pos[other[c]], axis=1)
            w *= bessel_kernel(r, d, alphas[c], m0)
        w /= q
    for k in fixed:
        a, b, alpha = net.edges[k]
        w *= bessel_kernel(np.linalg.norm(pos[a] - pos[b], axis=1), d, alpha, m0)
    if math.isfinite(cfg.truncation_radius):
        root = pos[min(net.pinned)]
        R = cfg.truncation_radius / m0
        far = np.zeros(n, dtype=bool)
        for i in range(net.n_nodes):
            far |= np.linalg.norm(pos[i] - root, axis=1) > R
        w[far] = 0.0
    return np.nan_to_num(w, nan=0.0, posinf=0.0)


def evaluate_network(net: KernelNetwork, cfg: QuadratureConfig) -> NumericResult:
    order, fixed = _placement(net)
    per = max(1, cfg.samples // cfg.batches)
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.batches)
    work = lambda s: _batch(net, cfg, order, fixed, per, s)
    if _workers() > 1:
        with ThreadPoolExecutor(_workers()) as ex:
            parts = list(ex.map(work, seeds))
    else:
        parts = [work(s) for s in seeds]
    means = np.array([p.mean() for p in parts])
    value = float(means.mean())
    if cfg.mode == "deterministic-grid":
        stderr = float(means.std(ddof=1) / math.sqrt(len(means))) if len(means) > 1 else float("nan")
    else:
        allw = np.concatenate(parts)
        stderr = float(allw.std(ddof=1) / math.sqrt(len(allw)))
    ok = abs(stderr) <= cfg.target_rel_error * abs(value) if value else stderr == 0
    if not ok:
        warnings.warn(f"target relative error {cfg.target_rel_error} not reached "
                      f"(stderr/value = {stderr / abs(value) if value else float('inf'):.3g})", RuntimeWarning)
    return NumericResult(value, stderr, per * cfg.batches, cfg.seed, ok)


def graph_network(g: GenFeynmanGraph, model: LevyModel, *, outer_positions: Sequence[Sequence[float]] = (),
                  collapse_two_leg: bool = False, lambdas: dict[int, float] | None = None) -> KernelNetwork:
    """Kernel network of a generalized graph under the Levy rules: each empty
    vertex with n legs is a point z weighted by c_n, and each edge from a full
    vertex at y carries g(y - z).  Without outer vertices inner vertex 0 is
    pinned at the origin (density convention).

    With ``collapse_two_leg`` every 2-leg inner vertex is integrated out
    exactly, giving a ``g * g`` edge between its empty vertices."""
    spec = model.propagator
    d, alpha = spec.d, float(spec.alpha)
    n, m, k = g.n_outer, g.m, len(g.empties)
    # node ids: outer 0..n-1, inner n..n+m-1, empties after
    enode = lambda c: n + m + c
    coef = 1.0
    for e in g.empties:
        coef *= float(coupling_constant(model, len(e)))
    if lambdas:
        for p in g.arities:
            coef *= float(lambdas.get(p, 1.0))
    edges: list[tuple[int, int, float]] = []
    const = 1.0
    collapsed = set()
    if collapse_two_leg:
        where: dict[tuple[int, int], int] = {}
        for c, e in enumerate(g.empties):
            for ep in e:
                where.setdefault(ep, c)
        for v, p in enumerate(g.arities):
            if p == 2 and g.distinguishable_legs:
                a, b = where[(v, 0)], where[(v, 1)]
                collapsed.add(v)
                if a == b:
                    two = PropagatorSpec(d, 2 * alpha, spec.m0)
                    if not two.finite_at_origin:
                        raise NumericEvalError("collapsed loop is singular at the origin")
                    const *= float(bessel_kernel(0.0, d, 2 * alpha, spec.m0))
                else:
                    edges.append((enode(a), enode(b), 2 * alpha))
    for c, e in enumerate(g.empties):
        for v, l in e:
            if v == -1:
                edges.append((l, enode(c), alpha))
            elif v not in collapsed:
                edges.append((n + v, enode(c), alpha))
    pinned: dict[int, np.ndarray] = {}
    if n:
        if len(outer_positions) != n:
            raise NumericEvalError("need one position per outer vertex")
        for i, x in enumerate(outer_positions):
            pinned[i] = np.asarray(x, dtype=float)
    else:
        first = next((n + v for v in range(m) if v not in collapsed), enode(0) if k else None)
        if first is None:
            raise NumericEvalError("nothing to integrate")
        pinned[first] = np.zeros(d)
    # drop nodes of collapsed vertices by renumbering
    used = sorted({x for a, b, _ in edges for x in (a, b)} | set(pinned))
    idx = {x: i for i, x in enumerate(used)}
    edges = [(idx[a], idx[b], al) for a, b, al in edges]
    pinned = {idx[x]: p for x, p in pinned.items()}
    return KernelNetwork(len(used), edges, d, float(spec.m0), pinned, coef, const)


def evaluate_graph_numeric(g: GenFeynmanGraph, model: LevyModel, cfg: QuadratureConfig | None = None,
                           **kw) -> NumericResult:
    """Value of a connected graph (density convention when it has no outer
    vertices) with a statistical error estimate."""
    if not is_connected(g):
        raise NumericEvalError("graph is not connected")
    if model.modified:
        raise NumericEvalError("modified two-point models are not supported by the network sampler")
    cfg = cfg or QuadratureConfig()
    return evaluate_network(graph_network(g, model, **kw), cfg)


def classical_network(cg, model: LevyModel, outer_positions: Sequence[Sequence[float]] = ()) -> KernelNetwork:
    """Network of a classical graph whose lines carry g_1 = c_2 g * g."""
    spec = model.propagator
    d, alpha = spec.d, float(spec.alpha)
    n = cg.n_outer
    node = lambda x: (-1 - x) if x < 0 else n + x
    c2 = float(coupling_constant(model, 2))
    edges, const = [], 1.0
    for a, b in cg.lines:
        if a == b:
            const *= float(bessel_kernel(0.0, d, 2 * alpha, spec.m0))
        else:
            edges.append((node(a), node(b), 2 * alpha))
    pinned = {i: np.asarray(x, float) for i, x in enumerate(outer_positions)} if n else {n: np.zeros(d)}
    return KernelNetwork(n + len(cg.arities), edges, d, float(spec.m0), pinned, c2 ** len(cg.lines), const)


# ------------------------------------------------------------ oracles
def ring_integral_quadrature(n: int, lambda2: float = 1.0, m0: float = 1.0) -> float:
    """(2 pi)^-1 int_0^inf a da / (a^2 + m0^2)^(2n), momentum space."""
    f = lambda a: a / (a * a + m0 * m0) ** (2 * n)
    val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=500)
    return lambda2 ** n * val / (2 * math.pi)


def ring_integral_convolution(n: int, lambda2: float = 1.0, m0: float = 1.0) -> float:
    """gtilde_n(0) by numeric position-space convolution of gtilde_1 (n <= 3)."""
    spec = PropagatorSpec(2, 1, m0)
    g1 = lambda r: float(gtilde_numeric(1, r, lambda2, spec))
    if n == 1:
        return g1(0.0)
    if n == 2:
        val, _ = integrate.quad(lambda r: 2 * math.pi * r * g1(r) ** 2, 0, np.inf, epsrel=1e-12, limit=400)
        return val
    if n == 3:
        # triangle integral int int g1(|x|) g1(|y|) g1(|x - y|) dx dy in polar
        # coordinates; the integrand is bounded, so panelled Gauss-Legendre suffices
        def nodes(edges: Sequence[float], k: int) -> tuple[np.ndarray, np.ndarray]:
            x, w = np.polynomial.legendre.leggauss(k)
            xs = [(b - a) / 2 * x + (a + b) / 2 for a, b in zip(edges[:-1], edges[1:])]
            ws = [(b - a) / 2 * w for a, b in zip(edges[:-1], edges[1:])]
            return np.concatenate(xs), np.concatenate(ws)

        r, wr = nodes(np.array([0, 0.5, 1, 2, 4, 8, 16, 30, 45]) / m0, 40)
        th, wt = nodes([0, math.pi / 8, math.pi / 2, math.pi], 40)
        R, S, C = r[:, None, None], r[None, :, None], np.cos(th)[None, None, :]
        d = np.sqrt(np.maximum(R * R + S * S - 2 * R * S * C, 0.0))
        ring = 2 * (gtilde_numeric(1, d, lambda2, spec) * wt).sum(axis=2)
        f = r * gtilde_numeric(1, r, lambda2, spec)
        return float(2 * math.pi * np.einsum("i,j,i,j,ij->", wr, wr, f, f, ring))
    raise NumericEvalError("numeric convolution oracle implemented for n <= 3")


def quartic_integral_mc(lambda2: float = 1.0, m0: float = 1.0, samples: int = 1_000_000, seed: int = 2024) -> NumericResult:
    """Momentum-space estimate of int gtilde_1^4 dx.

    int gtilde_1^4 = lambda^4 (2 pi)^-6 int dk [int dq f(k-q) f(q)]^2 with
    f(q) = (q^2+m0^2)^-2.  Sample k from f(k)/int f, and q, q' independently
    from f; the integrand ratio is f(k-q) f(k-q') f(q) f(q') / f(k) up to the
    normalisations."""
    rng = np.random.Generator(np.random.PCG64(seed))
    norm_f = math.pi / m0 ** 2  # int_R2 (q^2+m^2)^-2 dq

    def draw(size: int) -> np.ndarray:
        # radial density for |q| under f: P(|q|^2 <= s) = s / (s + m0^2)
        u = rng.random(size)
        s = m0 ** 2 * u / (1 - u)
        th = rng.random(size) * 2 * math.pi
        r = np.sqrt(s)
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)

    f = lambda q: 1.0 / (np.sum(q * q, axis=1) + m0 ** 2) ** 2
    k = draw(samples)
    q1 = draw(samples)
    q2 = draw(samples)
    w = f(k - q1) * f(k - q2) / f(k) * norm_f ** 3  # int dk f(k) [.]^2/f(k) with q, q' ~ f
    scale = lambda2 ** 4 / (2 * math.pi) ** 6
    return NumericResult(float(w.mean() * scale), float(w.std(ddof=1) / math.sqrt(samples) * scale), samples, seed)


# ------------------------------------------------------------ clustering
@dataclass
class DecayEstimate:
    rate: float
    rates: list[float]
    prefactor_exponent: float
    separations: list[float]
    note: str = ""


def clustering_decay_probe(model: LevyModel, n: int, directions: Sequence[Sequence[float]] | None = None, *,
                           separations: Sequence[float] | None = None, samples: int = 400_000,
                           seed: int = 7) -> DecayEstimate:
    """Fit log|<phi(x_1)...phi(x_n)>^T| = -rate * R + gamma * log R + b while
    one point is pulled away by R along each direction; the remaining points
    sit on a small fixed cluster near the origin."""
    spec = model.propagator
    m0 = float(spec.m0)
    if directions is None:
        directions = [np.eye(spec.d)[0]]
    if coupling_constant(model, n) == 0:
        return DecayEstimate(math.inf, [], 0.0, [], f"c_{n} = 0: the truncated moment vanishes identically")
    seps = np.asarray(separations if separations is not None else np.linspace(4, 16, 7) / m0, dtype=float)
    rates, gammas = [], []
    for j, u in enumerate(directions):
        u = np.asarray(u, float)
        u = u / np.linalg.norm(u)
        perp = np.roll(np.eye(spec.d)[0], 1) if spec.d > 1 else np.zeros(1)
        base = [0.3 / m0 * i * perp for i in range(n - 1)]
        vals = []
        for R in seps:
            pts = base + [R * u]
            res = truncated_star_moment(model, pts, n, samples=samples, seed=seed + j)
            vals.append(abs(res.value))
        vals = np.asarray(vals)
        if np.any(vals <= 0) or not np.all(np.isfinite(vals)):
            raise NumericEvalError("decay fit failed: non-positive or non-finite values")
        A = np.stack([-seps, np.log(seps), np.ones_like(seps)], axis=1)
        coef, *_ = np.linalg.lstsq(A, np.log(vals), rcond=None)
        rates.append(float(coef[0]))
        gammas.append(float(coef[1]))
    return DecayEstimate(min(rates), rates, float(np.mean(gammas)), list(map(float, seps)))
