"""Approximating the negative gradient ``mu_K - nu_t`` by conic vertex combinations.

A direction is ``d = sum_i c_i (K(y_i, .) - nu_t)`` with ``c_i >= 0``; the
herding step uses ``g = d / Lambda`` where ``Lambda = sum_i c_i``, so that
``nu_t + g`` is again a convex combination of kernel atoms.

Every inner product is assembled from per-candidate vectors held by the
:class:`~kherding.embedding.HerdingState`:

* ``p[y]    = <mu_K - nu, K(y, .) - nu>``
* ``alpha[y] = |K(y, .) - nu|^2``
* ``beta[y] = <K(y, .) - nu, d>``

plus the scalars ``q = <mu_K - nu, d>`` and ``gamma = |d|^2``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .simplexopt import QuadraticProblem, nnls

_TINY = 1e-300
C_MAX = 1e12
DEFAULT_DELTA = {"pmp": -1e-4, "fc_pmp": -1e-4, "gcos": 1e-4, "fc_gcos": 1e-4}


class InvariantError(RuntimeError):
    """A quantity that theory says is positive came out non-positive."""


def align(f1_sq, f2_sq, inner):
    """Cosine between two RKHS elements given squared norms and their inner product.

    Returns -1 when either element is zero.
    """
    if f1_sq <= _TINY or f2_sq <= _TINY:
        return -1.0
    return float(min(1.0, max(-1.0, inner / math.sqrt(f1_sq * f2_sq))))


@dataclass
class Direction:
    """A conic combination of vertex directions at a fixed iterate.

    `coef` maps candidate index to coefficient. `Lambda` is tracked with the
    update rules of the producing algorithm and equals ``sum(coef)`` up to
    rounding. `history` holds per-round diagnostics.
    """

    coef: dict
    Lambda: float
    q: float
    gamma: float
    kvals: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    s_nu: float = 0.0
    rounds: int = 1
    history: dict = field(default_factory=dict, repr=False)

    @property
    def indices(self):
        return np.fromiter(self.coef.keys(), dtype=int, count=len(self.coef))

    @property
    def coefficients(self):
        return np.fromiter(self.coef.values(), dtype=float, count=len(self.coef))

    @property
    def norm(self):
        return math.sqrt(max(self.gamma, 0.0))

    def cos(self, residual_sq):
        return align(residual_sq, self.gamma, self.q)

    def copy(self):
        return Direction(dict(self.coef), self.Lambda, self.q, self.gamma, self.kvals.copy(),
                         self.beta.copy(), self.s_nu, self.rounds, self.history)

    @classmethod
    def single(cls, state, i, c=1.0, p=None):
        """``c (K(x_i, .) - nu)``."""
        p = state.p() if p is None else p
        col = state.pool.column(i)
        beta = c * state.atom_inner(i)
        return cls({int(i): c}, c, c * float(p[i]), c * float(beta[i]), c * col, beta,
                   c * float(state.nu_vals[i]))

    def add(self, state, i, c, p_i):
        """``d <- d + c (K(x_i, .) - nu)``; `Lambda` grows by `c`."""
        inner_i = state.atom_inner(i)
        self.gamma = self.gamma + 2.0 * c * float(self.beta[i]) + c * c * float(inner_i[i])
        self.q += c * p_i
        self.beta = self.beta + c * inner_i
        self.kvals = self.kvals + c * state.pool.column(i)
        self.s_nu += c * float(state.nu_vals[i])
        self.coef[int(i)] = self.coef.get(int(i), 0.0) + c
        self.Lambda += c

    def scale(self, factor):
        """``d <- factor d``; `Lambda` is left to the caller."""
        for k in self.coef:
            self.coef[k] *= factor
        self.q *= factor
        self.gamma *= factor * factor
        self.beta = self.beta * factor
        self.kvals = self.kvals * factor
        self.s_nu *= factor

    @classmethod
    def from_coefficients(cls, state, idx, c, p):
        idx = np.asarray(idx, dtype=int)
        c = np.asarray(c, dtype=float)
        keep = c > 0
        idx, c = idx[keep], c[keep]
        cols = state.pool.columns(idx)
        kvals = cols @ c
        lam = float(c.sum())
        s_nu = float(c @ state.nu_vals[idx])
        beta = kvals - lam * state.nu_vals - s_nu + lam * state.nu_nu
        gamma = float(c @ beta[idx])
        return cls({int(i): float(v) for i, v in zip(idx, c)}, lam, float(c @ p[idx]), gamma,
                   kvals, beta, s_nu)

    def step_weights(self):
        """Atom indices and convex weights of ``nu + g``'s new mass."""
        return self.indices, self.coefficients / self.Lambda, self.kvals / self.Lambda


@dataclass
class CosStepScalars:
    p: float
    q: float
    alpha: float
    beta: float
    gamma: float


def gcos_closed_form(s):
    """Best positive step ``c`` for adding one atom to a direction.

    Maximises ``g(c) = (c p + q) / sqrt(alpha c^2 + 2 beta c + gamma)`` over
    ``c >= 0``. Returns ``(c, g(c))`` when the stationary point is a strict
    improvement over ``c = 0``, otherwise ``None``.
    """
    den = s.p * s.beta - s.q * s.alpha
    if abs(den) < _TINY or s.gamma <= 0:
        return None
    c = (s.q * s.beta - s.p * s.gamma) / den
    if not (0 < c <= C_MAX) or c * s.p + s.q < 0:
        return None
    rad = s.alpha * c * c + 2.0 * s.beta * c + s.gamma
    if rad <= 0:
        return None
    val = (c * s.p + s.q) / math.sqrt(rad)
    if val <= s.q / math.sqrt(s.gamma):
        return None
    return c, val


def _gcos_candidates(p, alpha, beta, q, gamma):
    """Vectorised :func:`gcos_closed_form` over all candidates.

    Returns ``(c, value)`` arrays with ``value = -inf`` where no admissible
    positive step exists.
    """
    den = p * beta - q * alpha
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        c = (q * beta - p * gamma) / den
        rad = alpha * c * c + 2.0 * beta * c + gamma
        val = (c * p + q) / np.sqrt(rad)
        ok = (np.abs(den) >= _TINY) & (c > 0) & (c <= C_MAX) & (c * p + q >= 0) & (rad > 0)
        ok &= val > q / math.sqrt(gamma)
    return c, np.where(ok, val, -np.inf)


def _best_align_vertex(state, p, alpha, r_sq):
    score = np.full(p.shape, -np.inf)
    ok = alpha > _TINY
    score[ok] = p[ok] / np.sqrt(alpha[ok])
    i = int(np.argmax(score))
    if not np.isfinite(score[i]) or p[i] <= 0:
        return None
    return i


def _nnls_refit(state, d, p, warm=True):
    idx = d.indices
    G = state.pool.gram(idx) - state.nu_vals[idx][:, None] - state.nu_vals[idx][None, :] + state.nu_nu
    G = 0.5 * (G + G.T)
    c = nnls(QuadraticProblem(G, p[idx]), warm_start=d.coefficients if warm else None)
    return Direction.from_coefficients(state, idx, c, p)


def _check_q(q, k):
    if not q > 0:
        raise InvariantError(f"q = <mu_K - nu, d> = {q!r} is not positive at round {k}")


def gcos(state, k_max, delta=DEFAULT_DELTA["gcos"], fully_corrective=False):
    """Greedy maximisation of the cosine between ``d`` and ``mu_K - nu``.

    Returns ``None`` when no candidate direction has positive alignment.
    With `fully_corrective`, all coefficients are refit by NNLS after each
    new atom.
    """
    if delta < 0:
        raise ValueError("gcos requires delta >= 0")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    p, alpha = state.p(), state.alpha()
    r_sq = state.residual_sq
    first = _best_align_vertex(state, p, alpha, r_sq)
    if first is None:
        return None
    d = Direction.single(state, first, p=p)
    if fully_corrective:
        d = _nnls_refit(state, d, p)
    cos_hist = [d.cos(r_sq)]
    hist = {"cos": cos_hist, "chosen": [], "pre_nnls_cos": []}
    k = 1
    while k < k_max:
        _check_q(d.q, k)
        c, val = _gcos_candidates(p, alpha, d.beta, d.q, d.gamma)
        j = int(np.argmax(val))
        if not np.isfinite(val[j]):
            break
        cj = float(c[j])
        trial = d.copy()
        trial.add(state, j, cj, float(p[j]))
        if fully_corrective:
            hist["pre_nnls_cos"].append(trial.cos(r_sq))
            trial = _nnls_refit(state, trial, p)
        new_cos = trial.cos(r_sq)
        if new_cos - cos_hist[-1] <= delta:
            break
        hist["chosen"].append((j, cj, float(val[j])))
        d = trial
        cos_hist.append(new_cos)
        k += 1
    d.rounds = k
    d.history = hist
    return d


def fc_gcos(state, k_max, delta=DEFAULT_DELTA["fc_gcos"]):
    return gcos(state, k_max, delta, fully_corrective=True)


def pmp(state, k_max, delta=DEFAULT_DELTA["pmp"], fully_corrective=False):
    """Positive matching pursuit of ``mu_K - nu`` over the candidate cone.

    Each round takes either a forward step toward the best vertex or a
    backward step shrinking ``d``, with exact line search. `Lambda` follows
    ``Lambda + lambda`` for forward and ``Lambda (1 - lambda / |d|)`` for
    backward steps. Returns ``None`` if no forward step is possible at all.
    """
    if delta >= 1:
        raise ValueError("pmp requires delta < 1")
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    p, alpha = state.p(), state.alpha()
    r_sq = state.residual_sq
    usable = alpha > _TINY
    d = None
    cur_align = -1.0
    res_hist = [r_sq]
    hist = {"residual_sq": res_hist, "cos": [], "steps": [], "pre_nnls_cos": []}
    k = 0
    while k < k_max:
        if d is None:
            fwd_score = np.where(usable, p, -np.inf)
            back = -np.inf
            dnorm = 0.0
        else:
            fwd_score = np.where(usable, p - d.beta, -np.inf)
            dnorm = d.norm
            back = -(d.q - d.gamma) / dnorm if dnorm > _TINY else -np.inf
        v = int(np.argmax(fwd_score))
        fwd = float(fwd_score[v])
        if fwd >= back:
            lam = fwd / float(alpha[v])
            if not lam > 0:
                break
            if d is None:
                trial = Direction.single(state, v, lam, p=p)
            else:
                trial = d.copy()
                trial.add(state, v, lam, float(p[v]))
                trial.Lambda = d.Lambda + lam
            step = {"kind": "forward", "index": v, "lambda": lam}
        else:
            lam = back
            factor = 1.0 - lam / dnorm
            if not factor > 0:
                break
            trial = d.copy()
            trial.scale(factor)
            trial.Lambda = d.Lambda * factor
            step = {"kind": "backward", "lambda": lam, "norm": dnorm}
        if fully_corrective:
            hist["pre_nnls_cos"].append(trial.cos(r_sq))
            trial = _nnls_refit(state, trial, p)
            step["refit_lambda"] = trial.Lambda
        new_align = trial.cos(r_sq)
        if new_align - cur_align <= delta:
            break
        if trial.gamma <= _TINY:
            break
        d = trial
        cur_align = new_align
        hist["cos"].append(new_align)
        hist["steps"].append(step)
        res_hist.append(r_sq - 2.0 * d.q + d.gamma)
        k += 1
    if d is None:
        return None
    d.rounds = k
    d.history = hist
    return d


def fc_pmp(state, k_max, delta=DEFAULT_DELTA["fc_pmp"]):
    return pmp(state, k_max, delta, fully_corrective=True)


APPROXIMATORS = {"pmp": pmp, "gcos": gcos, "fc_pmp": fc_pmp, "fc_gcos": fc_gcos}
