"""Kernels, domains, samplers and mean embeddings.

Three kernels are supported: the Gaussian kernel ``exp(-|x - y|^2)``, the
Matern kernel with smoothness 3/2 and the distance kernel ``8/3 - |x - y|``
on the unit sphere in R^3.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import erf

SPHERE_CONST = 8.0 / 3.0
SPHERE_MEAN = 4.0 / 3.0
_SPHERE_TOL = 1e-12


class DomainError(ValueError):
    """A point lies outside the kernel's domain."""


class UnsupportedEmbedding(ValueError):
    """No closed form exists; use :func:`empirical_embedding` instead."""


@dataclass(frozen=True)
class Domain:
    kind: str = "box"
    dim: int = 2
    lower: tuple = ()
    upper: tuple = ()

    def __post_init__(self):
        if self.kind == "box":
            if self.dim < 1:
                raise ValueError("box dimension must be positive")
            lower = self.lower or (-1.0,) * self.dim
            upper = self.upper or (1.0,) * self.dim
            if len(lower) != self.dim or len(upper) != self.dim:
                raise ValueError("bounds must have one entry per axis")
            if not all(lo < hi for lo, hi in zip(lower, upper)):
                raise ValueError("box requires lower < upper on every axis")
            object.__setattr__(self, "lower", tuple(float(v) for v in lower))
            object.__setattr__(self, "upper", tuple(float(v) for v in upper))
        elif self.kind == "sphere":
            object.__setattr__(self, "dim", 3)
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def box(cls, dim, lower=-1.0, upper=1.0):
        return cls("box", dim, (lower,) * dim, (upper,) * dim)

    @classmethod
    def sphere(cls):
        return cls("sphere", 3)

    def check(self, points):
        """Raise :class:`DomainError` unless every row of `points` is in the domain."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise DomainError(f"expected points of dimension {self.dim}, got {pts.shape[1]}")
        if self.kind == "sphere":
            norms = np.linalg.norm(pts, axis=1)
            bad = np.abs(norms - 1.0) > _SPHERE_TOL
            if bad.any():
                raise DomainError(f"point with norm {norms[bad][0]!r} is not on the unit sphere")
        else:
            lo, hi = np.asarray(self.lower), np.asarray(self.upper)
            if ((pts < lo) | (pts > hi)).any():
                raise DomainError("point outside the box domain")
        return pts


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    domain: Domain
    rho: float = float(np.sqrt(3.0))

    def __post_init__(self):
        if self.kind not in ("gaussian", "matern32", "sphere_distance"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "sphere_distance" and self.domain.kind != "sphere":
            raise ValueError("the distance kernel lives on the sphere")
        if self.kind == "matern32" and not self.rho > 0:
            raise ValueError("rho must be positive")

    def __call__(self, X, Y):
        """Kernel matrix between the rows of `X` and `Y` (no domain checks)."""
        X = np.atleast_2d(X)
        Y = np.atleast_2d(Y)
        if self.kind == "gaussian":
            return np.exp(-cdist(X, Y, "sqeuclidean"))
        r = cdist(X, Y, "euclidean")
        if self.kind == "matern32":
            s = np.sqrt(3.0) * r / self.rho
            return (1.0 + s) * np.exp(-s)
        return SPHERE_CONST - r

    def diag(self, X):
        """K(x, x) for every row of `X`."""
        n = np.atleast_2d(X).shape[0]
        return np.full(n, SPHERE_CONST if self.kind == "sphere_distance" else 1.0)


def kernel_eval(spec, x, y):
    """Evaluate K(x, y) for two single points, checking the domain."""
    pts = spec.domain.check(np.vstack([np.asarray(x, float), np.asarray(y, float)]))
    return float(spec(pts[:1], pts[1:])[0, 0])


# -- sampling --------------------------------------------------------------


def sample_measure(domain, measure, m, rng):
    """Draw `m` i.i.d. points from `measure` on `domain`.

    `measure` is ``"uniform"`` (box or sphere) or ``"truncated_gaussian"``
    (density proportional to ``exp(-|x|^2)`` restricted to the box).
    """
    rng = np.random.default_rng(rng)
    if m < 1:
        raise ValueError("sample size must be at least 1")
    if domain.kind == "sphere":
        if measure != "uniform":
            raise ValueError("only the uniform measure is supported on the sphere")
        g = rng.standard_normal((m, 3))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    if measure == "uniform":
        return lo + (hi - lo) * rng.random((m, domain.dim))
    if measure == "truncated_gaussian":
        # exp(-|x|^2) is N(0, 1/2); reject draws outside the box
        out = np.empty((0, domain.dim))
        while out.shape[0] < m:
            need = m - out.shape[0]
            draw = rng.normal(0.0, np.sqrt(0.5), size=(2 * need + 16, domain.dim))
            keep = np.all((draw >= lo) & (draw <= hi), axis=1)
            out = np.vstack([out, draw[keep][:need]])
        return out
    raise ValueError(f"unknown measure {measure!r}")


# -- mean embeddings -------------------------------------------------------


@dataclass
class MeanEmbedding:
    """Evaluator for the kernel mean embedding of a probability measure.

    Calling the object on an ``(n, d)`` array returns ``mu_K`` at each row.
    `double_integral` is the squared RKHS norm of the embedding.

    Examples
    --------
    >>> spec = KernelSpec("sphere_distance", Domain.sphere())
    >>> emb = analytic_embedding(spec)
    >>> float(emb([[0.0, 0.0, 1.0]])[0]), emb.double_integral
    (1.3333333333333333, 1.3333333333333333)
    """

    spec: KernelSpec
    kind: str
    _double: float = None
    sample: np.ndarray = None
    _fn: object = field(default=None, repr=False)
    chunk: int = 512

    @property
    def double_integral(self):
        # O(m^2) for empirical embeddings, so computed on first use
        if self._double is None:
            total = 0.0
            for s in range(0, self.sample.shape[0], self.chunk):
                total += self.spec(self.sample[s:s + self.chunk], self.sample).sum()
            self._double = float(total / self.sample.shape[0] ** 2)
        return self._double

    def __call__(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if self.kind == "empirical":
            out = np.empty(Y.shape[0])
            for s in range(0, Y.shape[0], self.chunk):
                out[s:s + self.chunk] = self.spec(Y[s:s + self.chunk], self.sample).mean(axis=1)
            return out
        return self._fn(Y)


def _gauss_1d(lo, hi):
    """1-D embedding of exp(-(x-y)^2) against the density exp(-x^2) on [lo, hi]."""
    norm = 0.5 * np.sqrt(np.pi) * (erf(hi) - erf(lo))
    r2 = np.sqrt(2.0)

    def mu(y):
        # exp(-(x-y)^2 - x^2) = exp(-y^2/2) exp(-2 (x - y/2)^2)
        integral = np.sqrt(np.pi / 8.0) * (erf(r2 * (hi - y / 2)) - erf(r2 * (lo - y / 2)))
        return np.exp(-y * y / 2.0) * integral / norm

    # outer integral of a smooth function: Gauss-Legendre is exact to rounding
    nodes, wts = np.polynomial.legendre.leggauss(80)
    y = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    dens = np.exp(-y * y) / norm
    double = 0.5 * (hi - lo) * np.sum(wts * mu(y) * dens)
    return mu, double


def analytic_embedding(spec, measure=None):
    """Closed-form embedding for the two tractable (kernel, measure) pairs.

    Supported: the Gaussian kernel on a box with the truncated Gaussian
    measure, and the distance kernel on the sphere with the uniform measure.
    Anything else raises :class:`UnsupportedEmbedding`.
    """
    if spec.kind == "sphere_distance" and measure in (None, "uniform"):
        return MeanEmbedding(
            spec, "analytic", SPHERE_MEAN,
            _fn=lambda Y: np.full(np.atleast_2d(Y).shape[0], SPHERE_MEAN),
        )
    if spec.kind == "gaussian" and spec.domain.kind == "box" and measure in (None, "truncated_gaussian"):
        parts = [_gauss_1d(lo, hi) for lo, hi in zip(spec.domain.lower, spec.domain.upper)]

        def fn(Y):
            out = np.ones(Y.shape[0])
            for j, (mu, _) in enumerate(parts):
                out *= mu(Y[:, j])
            return out

        return MeanEmbedding(spec, "analytic", float(np.prod([d for _, d in parts])), _fn=fn)
    raise UnsupportedEmbedding(
        f"no closed-form embedding for {spec.kind} with measure {measure!r}; use empirical_embedding"
    )


def empirical_embedding(spec, sample_size, seed=None, measure="uniform", sample=None):
    """Equal-weight embedding of `sample_size` i.i.d. draws from `measure`.

    Passing `sample` explicitly skips the draw.
    """
    if sample is None:
        if sample_size < 1:
            raise ValueError("sample_size must be at least 1")
        sample = sample_measure(spec.domain, measure, sample_size, seed)
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    if sample.shape[0] < 1:
        raise ValueError("empirical embedding needs at least one point")
    return MeanEmbedding(spec, "empirical", sample=sample)
