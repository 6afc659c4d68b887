"""The compiled kernels and the numpy fallback must agree."""
from __future__ import annotations

import numpy as np
import pytest

from puea.oneclass import DetectorParams, IForestParams, McdParams, OcsvmParams, _backend, fit_detector
from puea.oneclass.ocsvm import initial_alpha

pytestmark = pytest.mark.skipif("cython" not in _backend.available(), reason="compiled kernels not built")

py = _backend.get("python")


@pytest.fixture(scope="module")
def cy():
    return _backend.get("cython")


@pytest.mark.parametrize("rounded", [False, True])
@pytest.mark.parametrize("skip_self", [False, True])
def test_knn_identical(cy, rounded, skip_self):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(700, 5)) * 3
    Q = X if skip_self else rng.normal(size=(150, 5)) * 3
    if rounded:
        X, Q = np.round(X), np.round(Q)
    for k in (1, 5, 20):
        a = py.knn(Q, X, k, skip_self)
        b = cy.knn(Q, X, k, skip_self)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])


def test_itree_identical(cy):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(256, 5))
    X[:40] = X[0]  # duplicates force constant-feature nodes
    u1, u2 = rng.random(512), rng.random(512)
    a = py.build_itree(X, u1, u2, 8)
    b = cy.build_itree(X, u1, u2, 8)
    n = a[-1]
    assert n == b[-1]
    for x, y in zip(a[:-1], b[:-1]):
        assert np.array_equal(np.asarray(x)[:n], np.asarray(y)[:n])


def test_smo_agrees(cy):
    rng = np.random.default_rng(7)
    X = rng.normal(size=(400, 5))
    m, nu = len(X), 0.1
    args = (X, 0.2, 1 / (nu * m), 1e-6, 100_000, 50, initial_alpha(m, nu))
    a = py.smo_one_class(*args)
    b = cy.smo_one_class(*args)
    assert np.allclose(a[0], b[0], atol=1e-12)
    assert np.allclose(a[1], b[1], atol=1e-10)


def test_scatter_and_mahalanobis_agree(cy):
    rng = np.random.default_rng(8)
    X = rng.normal(size=(500, 5))
    idx = np.sort(rng.choice(500, size=(4, 250)), axis=1)
    ma, ca = py.scatter(X, idx)
    mb, cb = cy.scatter(X, idx)
    assert np.allclose(ma, mb, atol=1e-13) and np.allclose(ca, cb, atol=1e-13)
    prec = np.linalg.inv(ca)
    assert np.allclose(py.mahalanobis_sq(X, ma, prec), cy.mahalanobis_sq(X, ma, prec), atol=1e-10)


def test_rbf_decision_agrees(cy):
    rng = np.random.default_rng(9)
    sv, coef, Q = rng.normal(size=(80, 5)), rng.random(80), rng.normal(size=(300, 5))
    assert np.allclose(py.rbf_decision(Q, sv, coef, 0.3), cy.rbf_decision(Q, sv, coef, 0.3), atol=1e-12)


@pytest.mark.parametrize("kind", ["iforest", "ocsvm", "mcd", "lof"])
def test_fitted_detectors_agree(kind):
    rng = np.random.default_rng(10)
    X = rng.normal(size=(600, 5)) @ rng.normal(size=(5, 5))
    params = DetectorParams(iforest=IForestParams(30, 256, 1), ocsvm=OcsvmParams(tolerance=1e-8),
                            mcd=McdParams(num_initial_subsets=60, seed=1))
    Q = rng.normal(size=(100, 5)) * 2
    out = {}
    for name in ("python", "cython"):
        with _backend.use(name):
            det = fit_detector(kind, X, params)
            out[name] = (det.score_many(Q), det.predict_many(Q))
    assert np.allclose(out["python"][0], out["cython"][0], rtol=1e-9, atol=1e-9)
    assert np.array_equal(out["python"][1], out["cython"][1])
