"""Small self-contained invariant suite behind ``kherding check``."""

import numpy as np

from .embedding import CandidatePool, GramCache, fc_orthogonality_residual, mmd_squared, optimal_weights
from .herding import HerdingConfig, herd
from .kernels import Domain, KernelSpec, analytic_embedding, empirical_embedding, sample_measure
from .simplexopt import QuadraticProblem, nnls, nnls_kkt_violation, simplex_kkt_violation, simplex_qp


def _gauss():
    spec = KernelSpec("gaussian", Domain.box(2))
    return spec, analytic_embedding(spec)


def _sphere():
    spec = KernelSpec("sphere_distance", Domain.sphere())
    return spec, analytic_embedding(spec)


def check_symmetry(rng):
    for spec in (_gauss()[0], KernelSpec("matern32", Domain.box(2)), _sphere()[0]):
        meas = "uniform"
        X = sample_measure(spec.domain, meas, 100, rng)
        Y = sample_measure(spec.domain, meas, 100, rng)
        a = np.array([spec(x[None], y[None])[0, 0] for x, y in zip(X, Y)])
        b = np.array([spec(y[None], x[None])[0, 0] for x, y in zip(X, Y)])
        if not np.array_equal(a, b):
            return False
    return True


def check_positive_definite(rng):
    for spec in (_gauss()[0], KernelSpec("matern32", Domain.box(2))):
        X = sample_measure(spec.domain, "uniform", 20, rng)
        G = spec(X, X)
        if np.linalg.eigvalsh(0.5 * (G + G.T)).min() < -1e-8:
            return False
    return True


def _runs(rng):
    spec, emb = _gauss()
    cand = sample_measure(spec.domain, "truncated_gaussian", 400, rng)
    for method in ("eq_weight", "linesearch", "fc", "pmp", "gcos", "fc_pmp", "fc_gcos"):
        cfg = HerdingConfig.for_method(method, T=25, k_max=5)
        yield method, herd(cfg, spec, emb, CandidatePool(spec, emb, cand))


def check_simplex_and_monotone(rng):
    for method, (_, trace) in _runs(rng):
        if min(trace.min_weight) < -1e-12:
            return False
        if max(abs(s - 1.0) for s in trace.weight_sum) > 1e-10:
            return False
        if method != "eq_weight" and (np.diff(trace.epsilon) > 1e-12).any():
            return False
    return True


def check_product_identity(rng):
    for method, (_, trace) in _runs(rng):
        if method in ("eq_weight", "fc"):
            continue
        e, c, g = trace.epsilon, trace.cos_theta, trace.gamma
        for t in range(1, len(e)):
            if g[t] < 1 and abs(e[t] - (1 - c[t] ** 2) * e[t - 1]) > 1e-6 * e[t - 1]:
                return False
    return True


def check_inner_loops(rng):
    spec, emb = _gauss()
    cand = sample_measure(spec.domain, "truncated_gaussian", 400, rng)
    _, tr = herd(HerdingConfig.for_method("gcos", T=20, k_max=8, delta=0.0), spec, emb,
                 CandidatePool(spec, emb, cand))
    for inner in tr.inner[1:]:
        if (np.diff(inner["cos"]) < -1e-10).any():
            return False
    _, tr = herd(HerdingConfig.for_method("pmp", T=20, k_max=8), spec, emb, CandidatePool(spec, emb, cand))
    for inner in tr.inner[1:]:
        if (np.diff(np.sqrt(np.maximum(inner["residual_sq"], 0))) > 1e-12).any():
            return False
    return True


def check_fc_orthogonality(rng):
    spec, emb = _sphere()
    cand = sample_measure(spec.domain, "uniform", 500, rng)
    measure, _ = herd(HerdingConfig.for_method("fc", T=30), spec, emb, CandidatePool(spec, emb, cand))
    cache = GramCache.for_measure(spec, emb, measure)
    return fc_orthogonality_residual(measure, emb, cache) <= 1e-6


def check_optimal_weights(rng):
    spec, emb = _gauss()
    X = sample_measure(spec.domain, "uniform", 6, rng)
    w, err, _ = optimal_weights(spec, emb, X)
    from .embedding import DiscreteMeasure
    m = DiscreteMeasure(X, w)
    direct = mmd_squared(m, emb, GramCache.for_measure(spec, emb, m))
    return abs(err ** 2 - direct) <= 1e-8 * max(1.0, abs(direct))


def check_solvers(rng):
    for _ in range(10):
        A = rng.standard_normal((5, 5))
        prob = QuadraticProblem(A @ A.T + 1e-3 * np.eye(5), rng.standard_normal(5))
        tol = prob.tolerance()
        if nnls_kkt_violation(prob, nnls(prob)) > tol or simplex_kkt_violation(prob, simplex_qp(prob)) > tol:
            return False
    return True


def check_empirical_embedding(rng):
    spec = KernelSpec("matern32", Domain.box(2))
    emb = empirical_embedding(spec, 300, rng)
    y = sample_measure(spec.domain, "uniform", 5, rng)
    direct = spec(y, emb.sample).sum(axis=1) / emb.sample.shape[0]
    return np.allclose(emb(y), direct, rtol=1e-14, atol=0)


SUITES = {
    "invariants": [
        ("kernel symmetry", check_symmetry),
        ("Gram positive semidefinite", check_positive_definite),
        ("empirical embedding exactness", check_empirical_embedding),
        ("simplex feasibility and monotone error", check_simplex_and_monotone),
        ("product identity", check_product_identity),
        ("inner-loop monotonicity", check_inner_loops),
        ("fully-corrective orthogonality", check_fc_orthogonality),
        ("optimal weight identity", check_optimal_weights),
        ("QP solver certificates", check_solvers),
    ]
}


def run_suite(name="invariants", seed=0, echo=print):
    rng = np.random.default_rng(seed)
    ok = True
    for label, fn in SUITES[name]:
        try:
            passed = bool(fn(rng))
        except Exception as exc:  # report, keep going
            passed = False
            label = f"{label} ({exc!r})"
        ok &= passed
        echo(f"{'PASS' if passed else 'FAIL'}  {label}")
    return ok
