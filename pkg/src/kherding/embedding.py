"""Discrete measures and RKHS inner products reduced to kernel evaluations."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial import cKDTree

MERGE_TOL = 1e-12
MIN_EIG = 1e-10


class ConditioningError(LinAlgError):
    def __init__(self, msg, pair=None):
        super().__init__(msg)
        self.pair = pair


@dataclass
class DiscreteMeasure:
    """Weighted point set ``sum_i w_i delta_{x_i}``; near-duplicate nodes are merged."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("nodes and weights differ in length")
        if self.nodes.shape[0] > 1:
            pairs = cKDTree(self.nodes).query_pairs(MERGE_TOL, output_type="ndarray")
            if len(pairs):
                self._merge(pairs)

    def _merge(self, pairs):
        n = self.nodes.shape[0]
        root = np.arange(n)

        def find(i):
            while root[i] != i:
                i = root[i]
            return i

        for i, j in pairs:
            a, b = find(i), find(j)
            if a != b:
                root[max(a, b)] = min(a, b)
        groups = np.array([find(i) for i in range(n)])
        keep = np.unique(groups)
        w = np.zeros(n)
        np.add.at(w, groups, self.weights)
        self.nodes = self.nodes[keep]
        self.weights = w[keep]

    def __len__(self):
        return self.nodes.shape[0]

    @property
    def total(self):
        return float(self.weights.sum())

    def on_simplex(self, neg_tol=1e-12, sum_tol=1e-10):
        return bool(self.weights.min(initial=0.0) >= -neg_tol and abs(self.total - 1.0) <= sum_tol)

    def integrate(self, f):
        vals = np.asarray(f(self.nodes), dtype=float)
        return float(self.weights @ vals)


@dataclass
class GramCache:
    """Kernel Gram matrix, embedding values and self-energy for a node set."""

    gram: np.ndarray
    z: np.ndarray
    nodes: np.ndarray = field(repr=False)
    self_energy: float = 0.0

    @classmethod
    def build(cls, spec, emb, nodes, weights=None):
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        gram = spec(nodes, nodes)
        cache = cls(gram, emb(nodes), nodes)
        if weights is not None:
            cache.self_energy = float(weights @ gram @ weights)
        return cache

    @classmethod
    def for_measure(cls, spec, emb, measure):
        return cls.build(spec, emb, measure.nodes, measure.weights)

    def check(self, measure):
        if measure.nodes.shape != self.nodes.shape or not np.array_equal(measure.nodes, self.nodes):
            raise RuntimeError("GramCache does not match the measure's nodes")


def mmd_squared(measure, emb, cache):
    """Squared RKHS distance between the target embedding and `measure`."""
    cache.check(measure)
    w = measure.weights
    return float(emb.double_integral - 2.0 * w @ cache.z + w @ cache.gram @ w)


def mmd(measure, emb, cache):
    return float(np.sqrt(max(mmd_squared(measure, emb, cache), 0.0)))


def inner_residual_vs_atom(spec, emb, measure, cache, y):
    """``<mu_K - nu, K(y, .) - nu>`` for the measure ``nu`` and a point `y`."""
    cache.check(measure)
    y = spec.domain.check(y)
    w = measure.weights
    self_energy = float(w @ cache.gram @ w)
    ky = spec(y, measure.nodes) @ w
    return emb(y) - ky - float(w @ cache.z) + self_energy


def optimal_weights(spec, emb, nodes, jitter=1e-12):
    """Unconstrained optimal quadrature weights ``K_X^{-1} z_X``.

    Returns ``(weights, worst_case_error, jittered)``. If the Cholesky
    factorisation fails, ``jitter * trace / n`` is added to the diagonal once.
    If the (jittered) Gram still has an eigenvalue at or below ``MIN_EIG``,
    :class:`ConditioningError` names the closest pair of nodes.
    """
    nodes = spec.domain.check(nodes)
    gram = spec(nodes, nodes)
    z = emb(nodes)
    n = gram.shape[0]
    jittered = False
    try:
        factor = cho_factor(gram, lower=True)
    except LinAlgError:
        jittered = True
        gram = gram + jitter * np.trace(gram) / n * np.eye(n)
        try:
            factor = cho_factor(gram, lower=True)
        except LinAlgError:
            factor = None
    if factor is None or np.linalg.eigvalsh(gram)[0] <= MIN_EIG:
        d = np.linalg.norm(nodes[:, None] - nodes[None], axis=-1)
        np.fill_diagonal(d, np.inf)
        i, j = np.unravel_index(np.argmin(d), d.shape)
        raise ConditioningError(
            f"Gram matrix singular; nodes {i} and {j} are {d[i, j]:.3e} apart", (int(i), int(j))
        )
    w = cho_solve(factor, z)
    err2 = emb.double_integral - float(z @ w)
    return w, float(np.sqrt(max(err2, 0.0))), jittered


def fc_orthogonality_residual(measure, emb, cache, support_tol=1e-8):
    """Largest ``|<mu_K - nu, K(x_j, .) - nu>|`` over nodes with weight above `support_tol`.

    For simplex-optimal weights this is the stationarity part of the KKT
    conditions and vanishes at the optimum.
    """
    if not measure.on_simplex():
        raise ValueError("weights are not on the simplex")
    cache.check(measure)
    w = measure.weights
    gw = cache.gram @ w
    inner = cache.z - gw - float(w @ cache.z) + float(w @ gw)
    on = w > support_tol
    return float(np.abs(inner[on]).max())


def fc_inactive_slack(measure, emb, cache, support_tol=1e-8):
    """Largest inner product over zero-weight nodes; optimality requires it to be <= 0."""
    cache.check(measure)
    w = measure.weights
    gw = cache.gram @ w
    inner = cache.z - gw - float(w @ cache.z) + float(w @ gw)
    off = w <= support_tol
    return float(inner[off].max()) if off.any() else -np.inf


class CandidatePool:
    """A fixed candidate set with cached kernel columns and embedding values.

    All herding atoms are candidates, so every inner product an algorithm
    needs is a combination of `z`, `diag` and cached columns.
    `kernel_evals` counts scalar kernel evaluations performed so far.
    """

    def __init__(self, spec, emb, points, z=None, check=True):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] == 0:
            raise ValueError("candidate set is empty")
        if check:
            spec.domain.check(points)
        self.spec = spec
        self.points = points
        self.z = emb(points) if z is None else np.asarray(z, dtype=float)
        self.diag = spec.diag(points)
        self.mumu = float(emb.double_integral)
        self._cols = {}
        self.kernel_evals = 0

    def __len__(self):
        return self.points.shape[0]

    def column(self, i):
        col = self._cols.get(i)
        if col is None:
            col = self.spec(self.points, self.points[i:i + 1])[:, 0]
            self.kernel_evals += col.shape[0]
            self._cols[i] = col
        return col

    def columns(self, idx):
        return np.column_stack([self.column(int(i)) for i in idx])

    def gram(self, idx):
        idx = np.asarray(idx, dtype=int)
        return self.columns(idx)[idx]


class HerdingState:
    """The iterate ``nu_t`` as simplex weights over a :class:`CandidatePool`.

    Maintains ``nu_vals[y] = sum_j w_j K(y, x_j)`` for every candidate; the
    self energy ``<nu, nu>`` and ``<mu_K, nu>`` follow from it in O(n).
    ``nu_vals`` is updated incrementally and rebuilt every `refresh_every`
    updates.
    """

    def __init__(self, pool, start, refresh_every=64):
        self.pool = pool
        self.weights = np.zeros(len(pool))
        self.weights[start] = 1.0
        self.refresh_every = refresh_every
        self._updates = 0
        self.refresh()

    def refresh(self):
        idx = self.support
        self.nu_vals = self.pool.columns(idx) @ self.weights[idx]
        self._updates = 0
        self._scalars()

    def _scalars(self):
        idx = self.support
        self.mu_nu = float(self.weights[idx] @ self.pool.z[idx])
        self.nu_nu = float(self.weights[idx] @ self.nu_vals[idx])

    @property
    def support(self):
        return np.flatnonzero(self.weights > 0)

    @property
    def node_count(self):
        return int(np.count_nonzero(self.weights > 0))

    @property
    def residual_sq(self):
        """``|mu_K - nu|^2``."""
        return self.pool.mumu - 2.0 * self.mu_nu + self.nu_nu

    @property
    def epsilon(self):
        return 0.5 * self.residual_sq

    def p(self):
        """``<mu_K - nu, K(y, .) - nu>`` for every candidate."""
        return self.pool.z - self.nu_vals - (self.mu_nu - self.nu_nu)

    def alpha(self):
        """``|K(y, .) - nu|^2`` for every candidate."""
        return np.maximum(self.pool.diag - 2.0 * self.nu_vals + self.nu_nu, 0.0)

    def atom_inner(self, i):
        """``<K(y, .) - nu, K(x_i, .) - nu>`` for every candidate y."""
        return self.pool.column(i) - self.nu_vals - self.nu_vals[i] + self.nu_nu

    def move(self, gamma, idx, coef, kvals):
        """``nu <- (1 - gamma) nu + gamma sum_i coef_i K(x_i, .)`` with ``sum coef = 1``.

        `kvals` is ``sum_i coef_i K(y, x_i)`` over the candidates.
        """
        self.weights *= 1.0 - gamma
        np.add.at(self.weights, idx, gamma * np.asarray(coef))
        self.weights[self.weights < 0] = 0.0
        self.nu_vals = (1.0 - gamma) * self.nu_vals + gamma * kvals
        self._updates += 1
        if self._updates >= self.refresh_every:
            self.refresh()
        else:
            self._scalars()

    def set_weights(self, idx, w):
        self.weights[:] = 0.0
        self.weights[np.asarray(idx, dtype=int)] = w
        self.refresh()

    def measure(self):
        idx = self.support
        return DiscreteMeasure(self.pool.points[idx], self.weights[idx])
