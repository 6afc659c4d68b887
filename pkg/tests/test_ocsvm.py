from __future__ import annotations

import math

import numpy as np
import pytest

from puea.oneclass import ConvergenceError, DegenerateDataError, OcsvmParams, fit_ocsvm, rbf_kernel
from puea.oneclass.ocsvm import initial_alpha, scale_gamma


def test_kernel_examples(rng):
    x = rng.normal(size=(7, 5))
    assert np.allclose(np.diag(rbf_kernel(x, x, 0.3)), 1.0)
    k = rbf_kernel([[0.0, 0.0]], [[1.0, 1.0]], 0.5)[0, 0]
    assert k == pytest.approx(math.exp(-1), abs=1e-15)
    assert k == pytest.approx(0.36788, abs=1e-5)


def test_scale_gamma():
    X = np.array([[0.0, 0.0], [2.0, 4.0]])
    # per-column variances 1 and 4, mean 2.5, d=2
    assert scale_gamma(X) == pytest.approx(1 / 5)
    with pytest.raises(DegenerateDataError):
        scale_gamma(np.ones((4, 2)))


def test_initial_alpha_feasible():
    for m, nu in [(10, 0.05), (1000, 0.1), (7, 1.0), (3, 0.5)]:
        a = initial_alpha(m, nu)
        assert a.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all((a >= 0) & (a <= 1 / (nu * m) + 1e-15))


def _full_alpha(model, X):
    """Map support-vector coefficients back to training rows (rows are distinct)."""
    pos = {row.tobytes(): i for i, row in enumerate(X)}
    alpha = np.zeros(len(X))
    for sv, a in zip(model.support_vectors, model.dual_coef):
        alpha[pos[sv.tobytes()]] = a
    return alpha


@pytest.mark.parametrize("nu", [0.05, 0.1, 0.3])
def test_dual_feasibility_and_kkt(rng, backend, nu):
    X = rng.normal(size=(400, 5)) * [1, 2, 0.5, 1, 3]
    tol = 1e-4
    model = fit_ocsvm(X, OcsvmParams(nu=nu, tolerance=tol))
    alpha = _full_alpha(model, X)
    upper = 1 / (nu * len(X))
    assert alpha.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(alpha >= 0) and np.all(alpha <= upper * (1 + 1e-12))
    # KKT residual from a full kernel recompute, independent of the solver's gradient
    grad = rbf_kernel(X, X, model.gamma) @ alpha
    eps = 1e-12 * upper
    up = alpha > eps  # may decrease
    down = alpha < upper - eps  # may increase
    residual = grad[up].max() - grad[down].min()
    assert residual <= tol
    at_bound = np.sum(alpha >= upper - eps)
    assert at_bound <= math.ceil(nu * len(X))


def test_nu_property_on_training_data(rng):
    X = rng.normal(size=(1000, 5))
    model = fit_ocsvm(X, OcsvmParams(nu=0.1))
    frac = np.mean(model.score_many(X) > 0)
    assert frac <= 0.1 + 0.05


def test_orientation(rng):
    X = rng.normal(size=(300, 2))
    model = fit_ocsvm(X, OcsvmParams(nu=0.1))
    assert model.score([8.0, 8.0]) > model.score([0.0, 0.0])
    assert model.score([8.0, 8.0]) == pytest.approx(model.rho, abs=1e-12)


def test_convergence_error_reports_residual(rng):
    X = rng.normal(size=(200, 3))
    with pytest.raises(ConvergenceError) as info:
        fit_ocsvm(X, OcsvmParams(nu=0.1, max_iter=2, tolerance=1e-10))
    assert info.value.residual > 1e-10
    assert "residual" in str(info.value)


def test_rejects_bad_input():
    with pytest.raises(DegenerateDataError):
        fit_ocsvm(np.zeros((1, 5)))
    with pytest.raises(ValueError):
        fit_ocsvm(np.random.default_rng(0).normal(size=(10, 2)), OcsvmParams(nu=0.0))


def test_determinism(rng, backend):
    X = rng.normal(size=(300, 5))
    a = fit_ocsvm(X)
    b = fit_ocsvm(X)
    assert np.array_equal(a.dual_coef, b.dual_coef)
    assert a.rho == b.rho
    assert np.array_equal(a.score_many(X), b.score_many(X))
