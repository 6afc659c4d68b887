"""One-class SVM (nu formulation, RBF kernel) solved by SMO."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .base import ConvergenceError, DegenerateDataError, DetectorKind, FittedDetector, OcsvmParams, as_matrix


def rbf_kernel(A, B, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||a - b||^2)`` for every pair of rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-gamma * d2)


def scale_gamma(X) -> float:
    """``1 / (d * mean per-feature variance)``."""
    X = np.asarray(X, dtype=float)
    var = X.var(axis=0).mean()
    if var <= 0:
        raise DegenerateDataError("every feature is constant; gamma='scale' is undefined")
    return 1.0 / (X.shape[1] * var)


def initial_alpha(m: int, nu: float) -> np.ndarray:
    """Feasible start: the first floor(nu m) multipliers at the box bound, the remainder on the next."""
    upper = 1.0 / (nu * m)
    alpha = np.zeros(m)
    full = min(int(math.floor(nu * m)), m)
    alpha[:full] = upper
    if full < m:
        alpha[full] = 1.0 - full * upper
    return alpha


def offset_from_gradient(alpha, grad, upper) -> float:
    """rho: mean gradient over free multipliers, else the midpoint of the KKT bracket."""
    tiny = 1e-12 * upper
    free = (alpha > tiny) & (alpha < upper - tiny)
    if free.any():
        return float(grad[free].mean())
    at_upper = alpha >= upper - tiny
    lo = grad[at_upper].max() if at_upper.any() else -np.inf
    hi = grad[~at_upper].min() if (~at_upper).any() else np.inf
    if not np.isfinite(lo):
        return float(hi)
    if not np.isfinite(hi):
        return float(lo)
    return float(0.5 * (lo + hi))


@dataclass(frozen=True, eq=False)
class OcsvmModel(FittedDetector):
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    rho: float
    gamma: float
    nu: float
    n_train: int
    n_iter: int
    kkt_gap: float
    threshold: float | None = None
    kind: DetectorKind = DetectorKind.OCSVM

    def decision(self, X) -> np.ndarray:
        """``sum_i alpha_i k(x_i, x)``; large inside the support."""
        X = as_matrix(X, self.support_vectors.shape[1])
        return _backend.kernels.rbf_decision(X, self.support_vectors, self.dual_coef, self.gamma)

    def score_many(self, X) -> np.ndarray:
        return self.rho - self.decision(X)


def fit_ocsvm(X, params: OcsvmParams | None = None) -> OcsvmModel:
    """Solve ``min 1/2 a'Ka  s.t.  0 <= a_i <= 1/(nu m), sum a = 1`` by SMO."""
    params = params or OcsvmParams()
    X = as_matrix(X)
    m, d = X.shape
    if m < 2:
        raise DegenerateDataError(f"one-class SVM needs at least 2 rows, got {m}")
    if not 0 < params.nu <= 1:
        raise ValueError(f"nu must lie in (0, 1], got {params.nu}")
    gamma = scale_gamma(X) if params.gamma == "scale" else float(params.gamma)
    upper = 1.0 / (params.nu * m)
    cache_rows = max(2, int(params.cache_mb * 2**20 / (8 * m)))
    alpha, grad, n_iter, gap = _backend.kernels.smo_one_class(
        X, gamma, upper, params.tolerance, params.max_iter, cache_rows, initial_alpha(m, params.nu)
    )
    if gap > params.tolerance:
        raise ConvergenceError(f"SMO stopped after {n_iter} iterations without converging", gap)
    rho = offset_from_gradient(alpha, grad, upper)
    sv = np.flatnonzero(alpha > 0)
    return OcsvmModel(
        support_vectors=X[sv].copy(),
        dual_coef=alpha[sv].copy(),
        rho=rho,
        gamma=gamma,
        nu=params.nu,
        n_train=m,
        n_iter=n_iter,
        kkt_gap=gap,
    )
