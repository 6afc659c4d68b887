"""Local outlier factor in novelty mode."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .base import DegenerateDataError, DetectorKind, FittedDetector, LofParams, as_matrix

LRD_CAP = 1e12


def _lrd(mean_reach):
    with np.errstate(divide="ignore"):
        return np.where(mean_reach > 0, np.minimum(1.0 / mean_reach, LRD_CAP), LRD_CAP)


@dataclass(frozen=True, eq=False)
class LofModel(FittedDetector):
    train: np.ndarray
    k: int
    k_distance: np.ndarray
    lrd: np.ndarray
    train_lof: np.ndarray  # leave-self-out LOF of each training row
    threshold: float | None = None
    kind: DetectorKind = DetectorKind.LOF

    def score_many(self, X) -> np.ndarray:
        X = as_matrix(X, self.train.shape[1])
        idx, dist = _backend.kernels.knn(X, self.train, self.k, False)
        reach = np.maximum(self.k_distance[idx], dist)
        lrd_x = _lrd(reach.mean(axis=1))
        return (self.lrd[idx] / lrd_x[:, None]).mean(axis=1)

    def training_scores(self, X_train=None) -> np.ndarray:
        return self.train_lof


def fit_lof(X, params: LofParams | None = None) -> LofModel:
    """Precompute k-distances and local reachability densities of the training rows.

    Neighbourhoods hold exactly ``k`` rows, ties broken by lowest index.
    """
    params = params or LofParams()
    X = as_matrix(X)
    m = len(X)
    k = params.k_neighbors
    if k >= m:
        raise DegenerateDataError(f"k_neighbors={k} must be smaller than the {m} training rows")
    idx, dist = _backend.kernels.knn(X, X, k, True)
    k_distance = dist[:, -1].copy()
    reach = np.maximum(k_distance[idx], dist)
    lrd = _lrd(reach.mean(axis=1))
    train_lof = (lrd[idx] / lrd[:, None]).mean(axis=1)
    return LofModel(
        train=X.copy(), k=k, k_distance=k_distance, lrd=lrd, train_lof=train_lof
    )
