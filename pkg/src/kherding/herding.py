"""Kernel herding drivers: vanilla, fully-corrective and gradient-approximation accelerated."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .embedding import CandidatePool, HerdingState
from .gradapprox import APPROXIMATORS, DEFAULT_DELTA, Direction
from .simplexopt import QuadraticProblem, simplex_qp

VARIANTS = ("eq_weight", "linesearch", "fully_corrective", "accelerated")
EPS_STOP = 1e-14
PRUNE_TOL = 1e-10


class DegenerateDirection(ArithmeticError):
    """The search direction has zero norm."""


@dataclass
class HerdingConfig:
    variant: str = "linesearch"
    approximator: str = None
    T: int = 100
    k_max: int = 10
    delta: float = None
    candidate_count: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == "accelerated":
            if self.approximator not in APPROXIMATORS:
                raise ValueError(f"accelerated herding needs an approximator in {sorted(APPROXIMATORS)}")
            if self.delta is None:
                self.delta = DEFAULT_DELTA[self.approximator]
            if self.approximator.endswith("gcos") and self.delta < 0:
                raise ValueError("gcos approximators require delta >= 0")
            if self.approximator.endswith("pmp") and self.delta >= 1:
                raise ValueError("pmp approximators require delta < 1")
        if self.T < 1 or self.k_max < 1 or self.candidate_count < 1:
            raise ValueError("T, k_max and candidate_count must be positive")

    @property
    def method(self):
        if self.variant == "accelerated":
            return self.approximator
        return {"fully_corrective": "fc"}.get(self.variant, self.variant)

    @classmethod
    def for_method(cls, method, **kw):
        """Build from a benchmark method name (``eq_weight``, ``fc``, ``gcos``, ...)."""
        if method in ("eq_weight", "linesearch"):
            return cls(variant=method, **kw)
        if method in ("fc", "fully_corrective"):
            return cls(variant="fully_corrective", **kw)
        return cls(variant="accelerated", approximator=method, **kw)


@dataclass
class IterationTrace:
    """Per-iteration record; row ``t`` describes ``nu_t`` and the step that produced it."""

    epsilon: list = field(default_factory=list)
    cos_theta: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    rounds: list = field(default_factory=list)
    node_count: list = field(default_factory=list)
    wall_time: list = field(default_factory=list)
    min_weight: list = field(default_factory=list)
    weight_sum: list = field(default_factory=list)
    inner: list = field(default_factory=list)
    extra: list = field(default_factory=list)
    converged: bool = False

    def record(self, state, start, cos=math.nan, gamma=math.nan, rounds=0, inner=None, extra=None):
        self.epsilon.append(state.epsilon)
        self.cos_theta.append(cos)
        self.gamma.append(gamma)
        self.rounds.append(rounds)
        self.node_count.append(state.node_count)
        self.wall_time.append(time.perf_counter() - start)
        w = state.weights[state.support]
        self.min_weight.append(float(w.min()))
        self.weight_sum.append(float(w.sum()))
        self.inner.append(inner or {})
        self.extra.append(extra or {})

    def __len__(self):
        return len(self.epsilon)

    @property
    def mmd(self):
        return np.sqrt(np.maximum(2.0 * np.asarray(self.epsilon), 0.0))


# -- building blocks -------------------------------------------------------


def argmax_vertex(state, scores=None):
    """Candidate index maximising ``<mu_K - nu_t, K(y, .) - nu_t>`` (lowest index on ties)."""
    if len(state.pool) == 0:
        raise ValueError("no candidates")
    scores = state.p() if scores is None else scores
    return int(np.argmax(scores))


def line_search_step(state, direction):
    """Exact line search of ``|nu + gamma g - mu_K|^2`` over ``gamma in [0, 1]`` for ``g = d / Lambda``."""
    if direction.gamma <= 0 or direction.Lambda <= 0:
        raise DegenerateDirection("direction has zero norm")
    g_sq = direction.gamma / direction.Lambda ** 2
    inner = direction.q / direction.Lambda
    return float(min(max(inner / g_sq, 0.0), 1.0))


def initial_index(pool):
    """Best single atom: the candidate with the largest embedding value."""
    return int(np.argmax(pool.z))


def _apply(state, direction, gamma):
    idx, coef, kvals = direction.step_weights()
    state.move(gamma, idx, coef, kvals)


def _notify(callback, trace, state):
    if callback is not None:
        callback(len(trace), state)


def _make_pool(spec, emb, candidates):
    if isinstance(candidates, CandidatePool):
        return candidates
    return CandidatePool(spec, emb, candidates)


# -- drivers ---------------------------------------------------------------


def herd_vanilla(config, spec, emb, candidates, callback=None):
    """Frank-Wolfe herding with step ``1/(t+1)`` (eq_weight) or exact line search."""
    if config.variant not in ("eq_weight", "linesearch"):
        raise ValueError("herd_vanilla handles eq_weight and linesearch")
    pool = _make_pool(spec, emb, candidates)
    start = time.perf_counter()
    state = HerdingState(pool, initial_index(pool))
    trace = IterationTrace()
    trace.record(state, start)
    _notify(callback, trace, state)
    for t in range(1, config.T):
        if state.epsilon < EPS_STOP:
            trace.converged = True
            break
        p = state.p()
        v = argmax_vertex(state, p)
        d = Direction.single(state, v, p=p)
        cos = d.cos(state.residual_sq)
        if config.variant == "eq_weight":
            gamma = 1.0 / (t + 1)
        else:
            if d.gamma <= 0 or p[v] <= 0:
                trace.converged = True
                break
            gamma = line_search_step(state, d)
        _apply(state, d, gamma)
        trace.record(state, start, cos, gamma, 1)
        _notify(callback, trace, state)
    return state.measure(), trace


def herd_fully_corrective(config, spec, emb, candidates, callback=None):
    """Herding that re-optimises all weights over the simplex after each new vertex."""
    if config.variant != "fully_corrective":
        raise ValueError("herd_fully_corrective handles the fully_corrective variant")
    pool = _make_pool(spec, emb, candidates)
    start = time.perf_counter()
    state = HerdingState(pool, initial_index(pool))
    trace = IterationTrace()
    trace.record(state, start)
    _notify(callback, trace, state)
    for t in range(1, config.T):
        if state.epsilon < EPS_STOP:
            trace.converged = True
            break
        p = state.p()
        v = argmax_vertex(state, p)
        d = Direction.single(state, v, p=p)
        if d.gamma <= 0 or p[v] <= 0:
            trace.converged = True
            break
        cos = d.cos(state.residual_sq)
        gamma = line_search_step(state, d)
        eps_convex = state.epsilon - gamma * d.q + 0.5 * gamma ** 2 * d.gamma
        support = state.support
        active = support if v in support else np.append(support, v)
        warm = np.append(state.weights[support], 0.0) if v not in support else state.weights[support]
        G = pool.gram(active)
        w = simplex_qp(QuadraticProblem(G, pool.z[active]), warm_start=warm)
        keep = w >= PRUNE_TOL
        w = w[keep] / w[keep].sum()
        state.set_weights(active[keep], w)
        trace.record(state, start, cos, gamma, 1, extra={"epsilon_convex_step": eps_convex})
        _notify(callback, trace, state)
    return state.measure(), trace


def herd_accelerated(config, spec, emb, candidates, callback=None):
    """Herding along approximate negative gradients ``g_t = d_t / Lambda_t``.

    Each row's ``inner`` dict carries the approximator's round history.
    """
    if config.variant != "accelerated":
        raise ValueError("herd_accelerated handles the accelerated variant")
    approx = APPROXIMATORS[config.approximator]
    pool = _make_pool(spec, emb, candidates)
    start = time.perf_counter()
    state = HerdingState(pool, initial_index(pool))
    trace = IterationTrace()
    trace.record(state, start)
    _notify(callback, trace, state)
    for t in range(1, config.T):
        if state.epsilon < EPS_STOP:
            trace.converged = True
            break
        d = approx(state, config.k_max, config.delta)
        if d is None or d.gamma <= 0 or d.Lambda <= 0:
            trace.converged = True
            break
        cos = d.cos(state.residual_sq)
        gamma = line_search_step(state, d)
        if gamma <= 0:
            trace.converged = True
            break
        hist = dict(d.history)
        hist["Lambda"] = d.Lambda
        hist["coef_sum"] = float(d.coefficients.sum())
        hist["min_coef"] = float(d.coefficients.min())
        hist["new_atoms"] = int(np.count_nonzero(state.weights[d.indices] == 0))
        _apply(state, d, gamma)
        trace.record(state, start, cos, gamma, d.rounds, inner=hist)
        _notify(callback, trace, state)
    return state.measure(), trace


def herd(config, spec, emb, candidates, callback=None):
    """Dispatch on ``config.variant``.

    `callback`, if given, is called as ``callback(t, state)`` after every
    recorded iterate, with ``t`` the 1-based trace row.
    """
    if config.variant in ("eq_weight", "linesearch"):
        return herd_vanilla(config, spec, emb, candidates, callback)
    if config.variant == "fully_corrective":
        return herd_fully_corrective(config, spec, emb, candidates, callback)
    return herd_accelerated(config, spec, emb, candidates, callback)
