import numpy as np

from kherding import CandidatePool, Direction, Domain, HerdingState, KernelSpec, analytic_embedding, sample_measure
from kherding.herding import initial_index, line_search_step


def advanced_state(seed, m=200, steps=5, kind="gaussian"):
    """A herding state after `steps` line-search herding updates."""
    if kind == "gaussian":
        spec = KernelSpec("gaussian", Domain.box(2))
        measure = "truncated_gaussian"
    else:
        spec = KernelSpec("sphere_distance", Domain.sphere())
        measure = "uniform"
    emb = analytic_embedding(spec)
    pool = CandidatePool(spec, emb, sample_measure(spec.domain, measure, m, seed))
    state = HerdingState(pool, initial_index(pool))
    for _ in range(steps):
        p = state.p()
        d = Direction.single(state, int(np.argmax(p)), p=p)
        idx, coef, kv = d.step_weights()
        state.move(line_search_step(state, d), idx, coef, kv)
    return state


def direct_inner(state, coef):
    """``(<mu - nu, d>, |d|^2)`` for ``d = sum_i c_i (K(x_i, .) - nu)`` from scratch."""
    idx = np.array(list(coef), dtype=int)
    c = np.array([coef[i] for i in idx])
    pool = state.pool
    sup = state.support
    w = state.weights[sup]
    K_ss = pool.gram(sup)
    K_is = pool.columns(sup)[idx]
    K_ii = pool.gram(idx)
    nu_i = K_is @ w
    nu_nu = w @ K_ss @ w
    p = pool.z[idx] - nu_i - (w @ pool.z[sup] - nu_nu)
    G = K_ii - nu_i[:, None] - nu_i[None, :] + nu_nu
    return float(c @ p), float(c @ G @ c)
