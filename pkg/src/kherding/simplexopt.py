"""Dense active-set solvers for small Gram-form quadratic programs.

Both solvers minimise ``c^T G c - 2 b^T c``; :func:`nnls` over the
non-negative orthant and :func:`simplex_qp` over the probability simplex.
Termination is certified by first-order KKT conditions.
"""

from dataclasses import dataclass

import numpy as np

_DUP_TOL = 1e-12


class SolverError(RuntimeError):
    def __init__(self, msg, violation=np.inf, iterations=0):
        super().__init__(f"{msg} (worst KKT violation {violation:.3e} after {iterations} iterations)")
        self.violation = violation
        self.iterations = iterations


@dataclass
class QuadraticProblem:
    G: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.G = np.atleast_2d(np.asarray(self.G, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        k = self.b.shape[0]
        if self.G.shape != (k, k):
            raise ValueError(f"G has shape {self.G.shape}, expected {(k, k)}")
        scale = 1.0 + np.abs(self.G).max(initial=0.0)
        if np.abs(self.G - self.G.T).max(initial=0.0) > 1e-12 * scale:
            raise ValueError("G must be symmetric")
        if (np.diag(self.G) < -1e-12 * scale).any():
            raise ValueError("G must have a non-negative diagonal")

    @property
    def size(self):
        return self.b.shape[0]

    def objective(self, c):
        c = np.asarray(c, dtype=float)
        return float(c @ self.G @ c - 2.0 * self.b @ c)

    def tolerance(self):
        return 1e-8 * (1.0 + np.abs(self.b).max(initial=0.0))


def _collapse(G, b):
    """Indices of one representative per group of identical atoms."""
    k = b.shape[0]
    if k < 2:
        return np.arange(k)
    d = np.diag(G)
    dist = d[:, None] + d[None, :] - 2.0 * G
    scale = 1.0 + np.abs(d).max()
    ii, jj = np.nonzero(np.triu(dist <= _DUP_TOL * scale, 1))
    if ii.size == 0:
        return np.arange(k)
    keep = np.ones(k, dtype=bool)
    for i, j in zip(ii, jj):
        if keep[i] and keep[j] and np.abs(G[i] - G[j]).max() <= _DUP_TOL * scale \
                and abs(b[i] - b[j]) <= _DUP_TOL * (1.0 + abs(b[i])):
            keep[j] = False
    return np.flatnonzero(keep)


def _solve(A, rhs):
    try:
        return np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, rhs, rcond=None)[0]


def _nnls_core(G, b, c, tol, max_iter):
    k = b.shape[0]
    passive = c > 0
    history = [float(c @ G @ c - 2 * b @ c)]
    it = 0

    def restricted(passive):
        s = np.zeros(k)
        idx = np.flatnonzero(passive)
        if idx.size:
            s[idx] = _solve(G[np.ix_(idx, idx)], b[idx])
        return s

    def settle(c, passive):
        # move toward the passive-set optimum, dropping indices that hit zero
        nonlocal it
        while True:
            it += 1
            s = restricted(passive)
            bad = passive & (s <= 0)
            if not bad.any():
                return s, passive
            ratio = c[bad] / (c[bad] - s[bad])
            alpha = ratio.min()
            c = c + alpha * (s - c)
            c[~passive] = 0.0
            passive = passive & (c > 1e-15)
            c[~passive] = 0.0
            if it > max_iter:
                return c, passive

    if passive.any():
        c, passive = settle(c, passive)
        history.append(float(c @ G @ c - 2 * b @ c))
    banned = np.zeros(k, dtype=bool)
    while it <= max_iter:
        w = b - G @ c
        cand = ~passive & ~banned
        if not cand.any():
            break
        j = np.flatnonzero(cand)[np.argmax(w[cand])]
        if w[j] <= tol:
            break
        trial = passive.copy()
        trial[j] = True
        s = restricted(trial)
        if s[j] <= 0:
            # numerically useless atom; exclude it for this solve
            banned[j] = True
            it += 1
            continue
        banned[:] = False
        c, passive = settle(c, trial)
        history.append(float(c @ G @ c - 2 * b @ c))
    return np.maximum(c, 0.0), it, history


def nnls(prob, warm_start=None, max_iter=None, return_info=False):
    """Non-negative minimiser of ``c^T G c - 2 b^T c`` (Lawson-Hanson in Gram form).

    Raises :class:`SolverError` when the KKT certificate cannot be met.
    """
    if not isinstance(prob, QuadraticProblem):
        prob = QuadraticProblem(*prob)
    k = prob.size
    tol = prob.tolerance()
    keep = _collapse(prob.G, prob.b)
    G, b = prob.G[np.ix_(keep, keep)], prob.b[keep]
    c0 = np.zeros(keep.size)
    if warm_start is not None:
        c0 = np.maximum(np.asarray(warm_start, float)[keep], 0.0)
    max_iter = max_iter or 3 * keep.size + 50
    c_red, it, history = _nnls_core(G, b, c0, tol, max_iter)
    c = np.zeros(k)
    c[keep] = c_red
    viol = nnls_kkt_violation(prob, c)
    if viol > tol:
        raise SolverError("nnls did not reach its KKT certificate", viol, it)
    if return_info:
        return c, {"iterations": it, "objective": history, "kkt": viol}
    return c


def nnls_kkt_violation(prob, c):
    grad = prob.G @ c - prob.b
    worst = max(0.0, -grad.min(initial=0.0))
    on = c > prob.tolerance()
    if on.any():
        worst = max(worst, np.abs(grad[on]).max())
    return float(worst)


def _simplex_core(G, b, w, tol, max_iter):
    k = b.shape[0]
    passive = w > 0
    history = [float(w @ G @ w - 2 * b @ w)]
    it = 0

    def restricted(passive):
        idx = np.flatnonzero(passive)
        n = idx.size
        A = np.zeros((n + 1, n + 1))
        A[:n, :n] = G[np.ix_(idx, idx)]
        A[:n, n] = -1.0
        A[n, :n] = 1.0
        rhs = np.append(b[idx], 1.0)
        sol = _solve(A, rhs)
        x = np.zeros(k)
        x[idx] = sol[:n]
        return x, sol[n]

    def settle(w, passive):
        nonlocal it
        while True:
            it += 1
            x, s = restricted(passive)
            bad = passive & (x <= 0)
            if not bad.any():
                return x, s, passive
            ratio = w[bad] / (w[bad] - x[bad])
            alpha = ratio.min()
            w = w + alpha * (x - w)
            passive = passive & (w > 1e-15)
            w[~passive] = 0.0
            if it > max_iter:
                return w, s, passive

    w, s, passive = settle(w, passive)
    history.append(float(w @ G @ w - 2 * b @ w))
    banned = np.zeros(k, dtype=bool)
    while it <= max_iter:
        g = G @ w - b
        cand = ~passive & ~banned
        if not cand.any():
            break
        j = np.flatnonzero(cand)[np.argmin(g[cand])]
        if g[j] - s >= -tol:
            break
        trial = passive.copy()
        trial[j] = True
        x, _ = restricted(trial)
        if x[j] <= 0:
            banned[j] = True
            it += 1
            continue
        banned[:] = False
        w, s, passive = settle(w, trial)
        history.append(float(w @ G @ w - 2 * b @ w))
    w = np.maximum(w, 0.0)
    return w / w.sum(), it, history


def simplex_qp(prob, warm_start=None, max_iter=None, return_info=False):
    """Minimiser of ``w^T G w - 2 b^T w`` over the probability simplex.

    `warm_start` may be any non-negative vector; it is renormalised onto the
    simplex. The returned weights sum to one exactly up to rounding.
    """
    if not isinstance(prob, QuadraticProblem):
        prob = QuadraticProblem(*prob)
    k = prob.size
    if k == 0:
        raise ValueError("empty problem")
    tol = prob.tolerance()
    keep = _collapse(prob.G, prob.b)
    G, b = prob.G[np.ix_(keep, keep)], prob.b[keep]
    w0 = None
    if warm_start is not None:
        w0 = np.maximum(np.asarray(warm_start, float)[keep], 0.0)
        if w0.sum() <= 0:
            w0 = None
    if w0 is None:
        w0 = np.zeros(keep.size)
        w0[np.argmin(np.diag(G) - 2.0 * b)] = 1.0
    else:
        w0 = w0 / w0.sum()
    max_iter = max_iter or 3 * keep.size + 50
    w_red, it, history = _simplex_core(G, b, w0, tol, max_iter)
    w = np.zeros(k)
    w[keep] = w_red
    viol = simplex_kkt_violation(prob, w)
    if viol > tol:
        raise SolverError("simplex_qp did not reach its KKT certificate", viol, it)
    if return_info:
        return w, {"iterations": it, "objective": history, "kkt": viol}
    return w


def simplex_kkt_violation(prob, w):
    """Worst KKT residual for simplex weights, using the support mean as multiplier."""
    if abs(w.sum() - 1.0) > 1e-10 or (w < 0).any():
        return np.inf
    grad = prob.G @ w - prob.b
    on = w > prob.tolerance()
    if not on.any():
        on = w > 0
    s = float(w @ grad)
    worst = max(0.0, s - grad.min())
    worst = max(worst, np.abs(grad[on] - s).max())
    return float(worst)
