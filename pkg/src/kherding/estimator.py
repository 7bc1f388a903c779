"""Scikit-learn style facade over the herding drivers."""

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .embedding import CandidatePool, GramCache, mmd
from .herding import HerdingConfig, herd
from .kernels import Domain, KernelSpec, analytic_embedding, empirical_embedding, sample_measure


class KernelHerding(BaseEstimator):
    """Select quadrature nodes and weights from a candidate set.

    Parameters
    ----------
    kernel : {"gaussian", "matern32", "sphere_distance"}
    method : str
        One of ``eq_weight``, ``linesearch``, ``fc``, ``pmp``, ``gcos``,
        ``fc_pmp``, ``fc_gcos``.
    n_iter : int
        Outer iterations.
    k_max : int
        Inner-round cap for the accelerated methods.
    delta : float or None
        Truncation parameter; None picks the method default.
    rho : float
        Matern scale.
    measure : str or None
        Target measure. None means truncated Gaussian for the Gaussian
        kernel and uniform otherwise.
    embedding_size : int or None
        If set, estimate the target embedding from this many draws instead
        of using a closed form.
    random_state : int, Generator or None
        Seeds the embedding sample.

    Attributes
    ----------
    nodes_, weights_ : ndarray
        The quadrature rule.
    trace_ : IterationTrace
    mmd_ : float
        Worst-case error of the rule.
    """

    def __init__(self, kernel="gaussian", method="gcos", n_iter=100, k_max=10, delta=None,
                 rho=math.sqrt(3.0), measure=None, embedding_size=None, random_state=None):
        self.kernel = kernel
        self.method = method
        self.n_iter = n_iter
        self.k_max = k_max
        self.delta = delta
        self.rho = rho
        self.measure = measure
        self.embedding_size = embedding_size
        self.random_state = random_state

    def _measure(self):
        if self.measure is not None:
            return self.measure
        return "truncated_gaussian" if self.kernel == "gaussian" else "uniform"

    def _spec(self, dim):
        if self.kernel == "sphere_distance":
            if dim != 3:
                raise ValueError("sphere_distance needs points in R^3")
            return KernelSpec("sphere_distance", Domain.sphere())
        return KernelSpec(self.kernel, Domain.box(dim), self.rho)

    def fit(self, X, y=None, sample=None):
        """Run herding over candidate points `X`.

        `sample`, if given, defines an empirical target measure.
        """
        X = check_array(X, dtype=np.float64)
        spec = self._spec(X.shape[1])
        if sample is not None:
            emb = empirical_embedding(spec, len(sample), sample=check_array(sample, dtype=np.float64))
        elif self.embedding_size:
            rng = check_random_state(self.random_state)
            emb = empirical_embedding(spec, self.embedding_size, rng, measure=self._measure())
        else:
            emb = analytic_embedding(spec, self._measure())
        cfg = HerdingConfig.for_method(self.method, T=self.n_iter, k_max=self.k_max, delta=self.delta,
                                       candidate_count=X.shape[0])
        measure, trace = herd(cfg, spec, emb, CandidatePool(spec, emb, X))
        self.spec_, self.embedding_ = spec, emb
        self.measure_, self.trace_ = measure, trace
        self.nodes_, self.weights_ = measure.nodes, measure.weights
        self.mmd_ = mmd(measure, emb, GramCache.for_measure(spec, emb, measure))
        self.n_features_in_ = X.shape[1]
        return self

    def integrate(self, f):
        """Quadrature estimate of the integral of `f` (vectorised over rows)."""
        check_is_fitted(self, "nodes_")
        return self.measure_.integrate(f)

    def transform(self, X):
        """Kernel features ``K(x, node_j)`` for each row of `X`."""
        check_is_fitted(self, "nodes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.spec_(X, self.nodes_)

    def score(self, X=None, y=None):
        """Negative worst-case error, so that larger is better."""
        check_is_fitted(self, "nodes_")
        return -self.mmd_

    @staticmethod
    def sample_candidates(kernel, dim, m, random_state=None, measure=None):
        """Convenience draw of `m` candidate points for the given kernel."""
        est = KernelHerding(kernel=kernel, measure=measure)
        spec = est._spec(dim)
        return sample_measure(spec.domain, est._measure(), m, check_random_state(random_state))
