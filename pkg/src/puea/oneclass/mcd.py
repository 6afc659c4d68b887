"""Minimum covariance determinant via FastMCD (raw estimates, no reweighting)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .base import DegenerateDataError, DetectorKind, FittedDetector, McdParams, as_matrix

N_REFINE = 10
MAX_REFINE_STEPS = 100
SINGULAR_RTOL = 1e-12
_BATCH = 32


def location_scatter(X, idx):
    """Mean and (divide-by-count) covariance of ``X[idx]``; ``idx`` may be batched ``(B, h)``."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim == 1:
        mu, cov = _backend.kernels.scatter(X, idx[None, :])
        return mu[0], cov[0]
    return _backend.kernels.scatter(X, idx)


def is_singular(cov) -> np.ndarray:
    """True where det(cov) / prod(diag(cov)) < SINGULAR_RTOL, i.e. the correlation matrix is singular."""
    cov = np.asarray(cov)
    diag = np.diagonal(cov, axis1=-2, axis2=-1)
    bad = np.any(diag <= 0, axis=-1)
    safe = np.where(bad[..., None], 1.0, diag)
    s = 1.0 / np.sqrt(safe)
    corr = cov * s[..., :, None] * s[..., None, :]
    sign, logdet = np.linalg.slogdet(corr)
    return bad | (sign <= 0) | (logdet < np.log(SINGULAR_RTOL))


def mahalanobis_sq(X, mu, cov) -> np.ndarray:
    """Squared Mahalanobis distances of all rows; batched over leading dims of ``mu``/``cov``."""
    prec = np.linalg.inv(cov)
    if np.ndim(mu) == 1:
        return _backend.kernels.mahalanobis_sq(X, mu[None, :], prec[None])[0]
    return _backend.kernels.mahalanobis_sq(X, mu, prec)


def c_step(X, idx, h):
    """One concentration step.

    Returns ``(new_idx, logdet_before, logdet_after)``: the ``h`` rows with the
    smallest Mahalanobis distance under the estimates from ``X[idx]``.  The
    determinant never increases.
    """
    X = np.asarray(X, dtype=float)
    mu, cov = location_scatter(X, np.asarray(idx))
    new = _closest(mahalanobis_sq(X, mu, cov), h)
    _, after = location_scatter(X, new)
    return new, float(np.linalg.slogdet(cov)[1]), float(np.linalg.slogdet(after)[1])


def _closest(d2, h):
    part = np.argpartition(d2, h - 1, axis=-1)[..., :h]
    return np.sort(part, axis=-1)


def _initial_subset(X, rng, d):
    """Random (d+1)-subset, grown one row at a time while its covariance is singular."""
    order = rng.permutation(len(X))
    size = d + 1
    while True:
        idx = order[:size]
        _, cov = location_scatter(X, idx)
        if not is_singular(cov) or size == len(X):
            return idx
        size += 1


@dataclass(frozen=True, eq=False)
class McdModel(FittedDetector):
    location: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    support: np.ndarray
    threshold: float | None = None
    kind: DetectorKind = DetectorKind.MCD

    def score_many(self, X) -> np.ndarray:
        X = as_matrix(X, len(self.location))
        diff = X - self.location
        d2 = ((diff @ self.precision) * diff).sum(axis=1)
        return np.sqrt(np.maximum(d2, 0.0))


def support_size(m: int, d: int, support_fraction: float | None) -> int:
    if support_fraction is None:
        return (m + d + 1) // 2
    return int(min(m, max(d + 1, np.ceil(support_fraction * m))))


def fit_mcd(X, params: McdParams | None = None) -> McdModel:
    """FastMCD on the full data.

    Each initial (d+1)-subset (drawn from ``default_rng([seed, t])``) is
    followed by two C-steps; the ``N_REFINE`` lowest-determinant candidates are
    then iterated until the determinant stops decreasing.
    """
    params = params or McdParams()
    X = as_matrix(X)
    m, d = X.shape
    if m <= 2 * (d + 1):
        raise DegenerateDataError(f"MCD needs more than {2 * (d + 1)} rows, got {m}")
    if np.any(X.var(axis=0) == 0):
        raise DegenerateDataError("a feature is constant; covariance would be singular")
    h = support_size(m, d, params.support_fraction)

    starts = []
    for t in range(params.num_initial_subsets):
        rng = np.random.default_rng([params.seed, t])
        idx = _initial_subset(X, rng, d)
        mu, cov = location_scatter(X, idx)
        if is_singular(cov):
            continue
        starts.append(_closest(mahalanobis_sq(X, mu, cov), h))
    if not starts:
        raise DegenerateDataError("every initial subset has a singular covariance; features are degenerate")

    candidates, logdets = [], []
    for b in range(0, len(starts), _BATCH):
        idx = np.stack(starts[b:b + _BATCH])
        for _ in range(2):
            mu, cov = location_scatter(X, idx)
            ok = ~is_singular(cov)
            idx, cov = idx[ok], cov[ok]
            if len(idx) == 0:
                break
            idx = _closest(mahalanobis_sq(X, mu[ok], cov), h)
        if len(idx):
            _, cov = location_scatter(X, idx)
            candidates.extend(idx)
            logdets.extend(np.linalg.slogdet(cov)[1])
    if not candidates:
        raise DegenerateDataError("C-steps collapsed onto a singular subset; features are degenerate")

    best_idx, best_logdet = None, np.inf
    for c in np.argsort(logdets, kind="stable")[:N_REFINE]:
        idx, logdet = candidates[c], logdets[c]
        for _ in range(MAX_REFINE_STEPS):
            new, _, new_logdet = c_step(X, idx, h)
            if new_logdet >= logdet or np.array_equal(new, idx):
                break
            idx, logdet = new, new_logdet
        if logdet < best_logdet:
            best_idx, best_logdet = idx, logdet

    mu, cov = location_scatter(X, best_idx)
    cov = 0.5 * (cov + cov.T)
    if is_singular(cov):
        raise DegenerateDataError(
            "robust covariance is singular; the features are (nearly) linearly dependent"
        )
    return McdModel(location=mu, covariance=cov, precision=np.linalg.inv(cov), support=best_idx)
