import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from kherding import KernelHerding


def test_params_roundtrip():
    est = KernelHerding(method="fc", n_iter=20, k_max=4)
    params = est.get_params()
    assert params["method"] == "fc" and params["n_iter"] == 20
    twin = clone(est)
    assert twin.get_params() == params


def test_fit_gaussian_integrates():
    X = KernelHerding.sample_candidates("gaussian", 2, 800, random_state=0)
    est = KernelHerding(method="fc_gcos", n_iter=30, k_max=5).fit(X)
    assert est.weights_.sum() == pytest.approx(1.0, abs=1e-10)
    assert est.mmd_ == pytest.approx(est.trace_.mmd[-1], rel=1e-6)
    assert est.score() == -est.mmd_
    # constant functions integrate exactly
    assert est.integrate(lambda x: np.ones(len(x))) == pytest.approx(1.0, abs=1e-10)
    assert est.transform(X[:5]).shape == (5, len(est.nodes_))


def test_fit_with_sample_target():
    rng = np.random.default_rng(1)
    sample = rng.uniform(-1, 1, (300, 2))
    est = KernelHerding(kernel="matern32", method="linesearch", n_iter=40).fit(sample, sample=sample)
    assert est.embedding_.kind == "empirical"
    assert est.trace_.mmd[-1] < est.trace_.mmd[0]


def test_fit_sphere_and_errors():
    X = KernelHerding.sample_candidates("sphere_distance", 3, 400, random_state=2)
    est = KernelHerding(kernel="sphere_distance", method="gcos", n_iter=20, k_max=3).fit(X)
    assert np.allclose(np.linalg.norm(est.nodes_, axis=1), 1)
    with pytest.raises(ValueError):
        KernelHerding(kernel="sphere_distance").fit(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        est.transform(np.zeros((2, 2)))
    with pytest.raises(NotFittedError):
        KernelHerding().score()


def test_empirical_embedding_option():
    X = KernelHerding.sample_candidates("matern32", 2, 300, random_state=3)
    est = KernelHerding(kernel="matern32", method="fc", n_iter=15, embedding_size=500, random_state=4).fit(X)
    again = KernelHerding(kernel="matern32", method="fc", n_iter=15, embedding_size=500, random_state=4).fit(X)
    np.testing.assert_array_equal(est.weights_, again.weights_)
