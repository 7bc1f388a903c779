"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Reference-config runs are shared through module fixtures. Lines are echoed
immediately and collected for the terminal summary.
"""

import math
import os
import time

import numpy as np
import pytest

from kherding import (
    CandidatePool,
    DiscreteMeasure,
    GramCache,
    HerdingConfig,
    KernelSpec,
    Domain,
    QuadraticProblem,
    analytic_embedding,
    fc_orthogonality_residual,
    gcos,
    herd,
    mmd_squared,
    nnls,
    optimal_weights,
    sample_measure,
    simplex_qp,
)
from kherding import bench
from kherding.herding import HerdingState, initial_index, line_search_step
from kherding.gradapprox import Direction

from .conftest import ACCEPTANCE
from .oracles import sphere_mc
from .oracles.qp_search import dirichlet_search, zoom_grid_search

pytestmark = pytest.mark.slow
CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")
ACCEL = ("pmp", "gcos", "fc_pmp", "fc_gcos")


def report(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
    assert ok, detail


def run_reference(name, plan, callbacks=None):
    """Run ``{method: seeds}`` from a shipped config; returns traces keyed by (method, seed)."""
    cfg = bench.load_config(os.path.join(CONFIG_DIR, f"{name}.ini"))
    spec = cfg.kernel_spec()
    emb = bench.build_embedding(cfg, spec)
    traces, timing = {}, {}
    for seed in sorted({s for seeds in plan.values() for s in seeds}):
        cand = bench.generate_candidates(spec.domain, cfg.measure, cfg.candidates, seed)
        z = emb(cand)
        for method, seeds in plan.items():
            if seed not in seeds:
                continue
            cb = (callbacks or {}).get((method, seed))
            pool = CandidatePool(spec, emb, cand, z=z, check=False)
            t0 = time.perf_counter()
            _, trace = herd(cfg.herding_config(method, seed), spec, emb, pool, cb)
            timing[(method, seed)] = time.perf_counter() - t0
            traces[(method, seed)] = trace
    return {"config": cfg, "spec": spec, "emb": emb, "traces": traces, "timing": timing}


@pytest.fixture(scope="module")
def gaussian_ref():
    plan = {m: [0] for m in bench.METHODS}
    for m in ("linesearch", "pmp", "gcos"):
        plan[m] = [0, 1, 2, 3, 4]
    return run_reference("gaussian_d2", plan)


@pytest.fixture(scope="module")
def matern_refs():
    return [run_reference(n, {m: [0] for m in bench.METHODS}) for n in ("matern_d2", "matern_d3")]


@pytest.fixture(scope="module")
def sphere_ref():
    spec = KernelSpec("sphere_distance", Domain.sphere())
    emb = analytic_embedding(spec)
    residuals = []

    def orth(t, state):
        m = state.measure()
        residuals.append((len(m), fc_orthogonality_residual(m, emb, GramCache.for_measure(spec, emb, m))))

    plan = {m: [0] for m in bench.METHODS}
    for m in ("eq_weight", "fc", "fc_gcos"):
        plan[m] = [0, 1, 2]
    ref = run_reference("sphere", plan, callbacks={("fc", 0): orth})
    ref["orth"] = residuals
    return ref


def _all_refs(gaussian_ref, matern_refs, sphere_ref):
    return [gaussian_ref, *matern_refs, sphere_ref]


# -- 1 -----------------------------------------------------------------------


def test_c01_product_identity():
    spec = KernelSpec("gaussian", Domain.box(2))
    t0 = time.perf_counter()
    emb = analytic_embedding(spec)
    cand = bench.generate_candidates(spec.domain, "truncated_gaussian", 2000, 0)
    _, tr = herd(HerdingConfig.for_method("gcos", T=50), spec, emb, CandidatePool(spec, emb, cand))
    elapsed = time.perf_counter() - t0
    e, c, g = tr.epsilon, tr.cos_theta, tr.gamma
    checked, worst = 0, 0.0
    for t in range(1, len(e)):
        if g[t] < 1:
            checked += 1
            worst = max(worst, abs(e[t] - (1 - c[t] ** 2) * e[t - 1]) / e[t - 1])
    ok = checked > 0 and worst <= 1e-6 and elapsed < 30
    report("1", ok, f"max rel. deviation {worst:.2e} over {checked} steps, {elapsed:.1f}s")


# -- 2, 3 --------------------------------------------------------------------


def test_c02_simplex_feasibility(gaussian_ref, matern_refs, sphere_ref):
    worst_neg, worst_sum, n = 0.0, 0.0, 0
    for ref in _all_refs(gaussian_ref, matern_refs, sphere_ref):
        for tr in ref["traces"].values():
            worst_neg = min(worst_neg, min(tr.min_weight))
            worst_sum = max(worst_sum, max(abs(s - 1) for s in tr.weight_sum))
            n += len(tr)
    ok = worst_neg >= -1e-12 and worst_sum <= 1e-10
    report("2", ok, f"min weight {worst_neg:.1e}, max |sum-1| {worst_sum:.1e} over {n} iterates")


def test_c03_line_search_monotone(gaussian_ref, matern_refs, sphere_ref):
    worst, n = -np.inf, 0
    for ref in _all_refs(gaussian_ref, matern_refs, sphere_ref):
        for (method, _), tr in ref["traces"].items():
            if method == "eq_weight":
                continue
            worst = max(worst, np.diff(tr.epsilon).max(initial=-np.inf))
            n += len(tr)
    report("3", worst <= 1e-12, f"largest eps increase {worst:.1e} over {n} iterates")


# -- 4, 5 --------------------------------------------------------------------


def test_c04_cos_monotone():
    rounds, worst = 0, np.inf
    cases = [("gaussian", "truncated_gaussian", Domain.box(2)), ("sphere_distance", "uniform", Domain.sphere())]
    for kind, measure, dom in cases:
        spec = KernelSpec(kind, dom)
        emb = analytic_embedding(spec)
        cand = bench.generate_candidates(dom, measure, 2000, 1)
        for method in ("gcos", "fc_gcos"):
            cfg = HerdingConfig.for_method(method, T=60, k_max=10, delta=0.0)
            _, tr = herd(cfg, spec, emb, CandidatePool(spec, emb, cand))
            for inner in tr.inner[1:]:
                d = np.diff(inner["cos"])
                rounds += d.size
                worst = min(worst, d.min(initial=np.inf))
    ok = rounds >= 1000 and worst >= -1e-10
    report("4", ok, f"min cos change {worst:.2e} over {rounds} rounds")


def test_c05_pmp_residual(gaussian_ref, matern_refs, sphere_ref):
    rounds, worst = 0, -np.inf
    for ref in _all_refs(gaussian_ref, matern_refs, sphere_ref):
        for (method, _), tr in ref["traces"].items():
            if not method.endswith("pmp"):
                continue
            for inner in tr.inner[1:]:
                r = np.sqrt(np.maximum(inner["residual_sq"], 0.0))
                d = np.diff(r)
                rounds += d.size
                worst = max(worst, d.max(initial=-np.inf))
    ok = rounds > 0 and worst <= 1e-12
    report("5", ok, f"max residual increase {worst:.2e} over {rounds} rounds")


# -- 6 -----------------------------------------------------------------------


def test_c06_optimal_weight_identity():
    spec = KernelSpec("gaussian", Domain.box(2))
    emb = analytic_embedding(spec)
    rng = np.random.default_rng(6)
    worst, done = 0.0, 0
    while done < 50:
        k = int(rng.integers(1, 13))
        X = rng.uniform(-1, 1, (k, 2))
        if np.linalg.cond(spec(X, X)) > 1e4:  # keep well-conditioned sets only
            continue
        w, err, _ = optimal_weights(spec, emb, X)
        m = DiscreteMeasure(X, w)
        direct = mmd_squared(m, emb, GramCache.for_measure(spec, emb, m))
        worst = max(worst, abs(err ** 2 - direct) / abs(direct))
        done += 1
    report("6", worst <= 1e-8, f"max relative gap {worst:.2e} over 50 node sets")


# -- 7 -----------------------------------------------------------------------


def test_c07_fc_orthogonality(sphere_ref):
    res = sphere_ref["orth"]
    worst = max(r for _, r in res)
    nmax = max(n for n, _ in res)
    ok = worst <= 1e-6 and nmax >= 200
    report("7", ok, f"max residual {worst:.2e} over {len(res)} iterates, up to n={nmax}")


# -- 8 -----------------------------------------------------------------------


def test_c08_sphere_constant():
    data = sphere_mc.load()
    emb = analytic_embedding(KernelSpec("sphere_distance", Domain.sphere()))
    zs = [abs(t["mean"] - emb(np.array([t["y"]]))[0]) / t["se"] for t in data["targets"]]
    zd = abs(data["double"]["mean"] - emb.double_integral) / data["double"]["se"]
    ok = len(zs) == 10 and data["m"] == 10**6 and max(zs) <= 3 and zd <= 3
    report("8", ok, f"max |z| {max(zs):.2f} at 10 points, double integral |z| {zd:.2f}")


# -- 9 -----------------------------------------------------------------------


def test_c09_qp_oracles():
    rng = np.random.default_rng(9)
    worst_nnls, worst_simplex = 0.0, 0.0
    sph = KernelSpec("sphere_distance", Domain.sphere())
    for i in range(20):
        k = 4 + i % 2
        A = rng.standard_normal((k, k))
        G = A @ A.T / k + 0.1 * np.eye(k)
        b = rng.standard_normal(k)
        c = nnls(QuadraticProblem(G, b))
        cmax = 1.05 * max(np.abs(np.linalg.solve(G, b)).max(), c.max(), 1e-3)
        best, _ = zoom_grid_search(G, b, cmax, n=15 if k == 5 else 21)
        worst_nnls = max(worst_nnls, abs(QuadraticProblem(G, b).objective(c) - best))

        X = sample_measure(sph.domain, "uniform", k, rng)
        prob = QuadraticProblem(sph(X, X), np.full(k, 4 / 3))
        w = simplex_qp(prob)
        best, _ = dirichlet_search(prob.G, prob.b, seed=i)
        worst_simplex = max(worst_simplex, abs(prob.objective(w) - best))
    ok = worst_nnls <= 1e-3 and worst_simplex <= 1e-6
    report("9", ok, f"nnls vs grid {worst_nnls:.1e}, simplex vs Dirichlet search {worst_simplex:.1e}")


# -- 10 ----------------------------------------------------------------------


def _slopes(ref, method):
    out = []
    for (m, seed), tr in sorted(ref["traces"].items()):
        if m == method:
            out.append(bench.loglog_slope(bench.trace_rows(m, seed, tr), "nodes", 20, 200))
    return out


def test_c10a_rate_eq_weight(sphere_ref):
    s = _slopes(sphere_ref, "eq_weight")
    ok = len(s) == 3 and all(-0.65 <= v <= -0.35 for v in s)
    report("10a", ok, "eq_weight slopes " + ", ".join(f"{v:+.3f}" for v in s) + " (window [-0.65, -0.35])")


def test_c10b_rate_fully_corrective(sphere_ref):
    fc, fcg = _slopes(sphere_ref, "fc"), _slopes(sphere_ref, "fc_gcos")
    total = sum(sphere_ref["timing"].values())
    ok = len(fc) == 3 and len(fcg) == 3 and max(fc + fcg) <= -0.60 and total < 600
    report("10b", ok, "fc " + ", ".join(f"{v:+.3f}" for v in fc) + "; fc_gcos "
           + ", ".join(f"{v:+.3f}" for v in fcg) + f"; sphere runs {total:.0f}s")


# -- 11 ----------------------------------------------------------------------


def _mmd_at_100(tr):
    n = np.asarray(tr.node_count)
    hit = np.flatnonzero(n >= 100)
    return tr.mmd[hit[0]] if hit.size else np.nan


def test_c11_ordering(gaussian_ref):
    med = {}
    for method in ("linesearch", "pmp", "gcos"):
        vals = [_mmd_at_100(gaussian_ref["traces"][(method, s)]) for s in range(5)]
        med[method] = float(np.median(vals))
    ok = med["gcos"] <= med["linesearch"] and med["gcos"] <= med["pmp"]
    report("11", ok, ", ".join(f"{m} {v:.3e}" for m, v in med.items()) + " (median MMD at 100 nodes)")


# -- 12 ----------------------------------------------------------------------


def _evals_per_round(m, t=10, k=6):
    spec = KernelSpec("gaussian", Domain.box(2))
    emb = analytic_embedding(spec)
    cand = bench.generate_candidates(spec.domain, "truncated_gaussian", m, 12)
    pool = CandidatePool(spec, emb, cand)
    state = HerdingState(pool, initial_index(pool))
    for _ in range(t):
        p = state.p()
        d = Direction.single(state, int(np.argmax(p)), p=p)
        idx, coef, kv = d.step_weights()
        state.move(line_search_step(state, d), idx, coef, kv)
    before = pool.kernel_evals
    d = gcos(state, k, delta=0.0)
    return (pool.kernel_evals - before) / d.rounds


def test_c12_cost_scaling():
    ms = np.array([500, 1000, 2000, 4000], dtype=float)
    counts = np.array([_evals_per_round(int(m)) for m in ms])
    slope, icpt = np.polyfit(ms, counts, 1)
    pred = slope * ms + icpt
    r2 = 1 - ((counts - pred) ** 2).sum() / ((counts - counts.mean()) ** 2).sum()
    report("12", r2 >= 0.99 and slope > 0,
           f"kernel evals per round {counts.tolist()}, R^2 = {r2:.4f}")
