"""Isolation forest."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .base import DegenerateDataError, DetectorKind, FittedDetector, IForestParams, as_matrix

EULER_GAMMA = 0.5772156649


def average_path_length(n):
    """Expected unsuccessful-search path length in a random BST of ``n`` keys.

    ``c(0) = c(1) = 0`` and ``c(2) = 1``; otherwise ``2 H(n-1) - 2 (n-1) / n``
    with ``H(i) ~ ln(i) + Euler's constant``.
    """
    n = np.asarray(n, dtype=float)
    out = np.zeros_like(n)
    big = n > 2
    out[n == 2] = 1.0
    nb = n[big]
    out[big] = 2.0 * (np.log(nb - 1.0) + EULER_GAMMA) - 2.0 * (nb - 1.0) / nb
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class IsolationForestModel(FittedDetector):
    feature: np.ndarray
    split: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_size: np.ndarray
    roots: np.ndarray
    subsample_size: int
    c_norm: float
    n_features: int
    threshold: float | None = None
    kind: DetectorKind = DetectorKind.ISOLATION_FOREST

    def mean_path_length(self, X) -> np.ndarray:
        X = as_matrix(X, self.n_features)
        leaf_adj = np.where(self.feature < 0, average_path_length(self.leaf_size), 0.0)
        return _backend.kernels.forest_path_length(
            X, self.feature, self.split, self.left, self.right, leaf_adj, self.roots
        )

    def score_many(self, X) -> np.ndarray:
        return 2.0 ** (-self.mean_path_length(X) / self.c_norm)


def fit_isolation_forest(X, params: IForestParams | None = None) -> IsolationForestModel:
    """Grow ``num_trees`` isolation trees, each on its own subsample.

    Tree ``t`` draws from ``default_rng([seed, t])``, so the forest does not
    depend on the order trees are built in.
    """
    params = params or IForestParams()
    X = as_matrix(X)
    m, d = X.shape
    if m < 2:
        raise DegenerateDataError(f"isolation forest needs at least 2 rows, got {m}")
    if np.all(X == X[0]):
        raise DegenerateDataError("every training row is identical; nothing to isolate")
    psi = min(params.subsample_size, m)
    max_depth = math.ceil(math.log2(psi))
    cap = 2 * psi
    kern = _backend.kernels
    parts = []
    offset = 0
    roots = []
    for t in range(params.num_trees):
        rng = np.random.default_rng([params.seed, t])
        rows = np.sort(rng.choice(m, size=psi, replace=False))
        u_feat = rng.random(cap)
        u_cut = rng.random(cap)
        feature, split, left, right, size, n_nodes = kern.build_itree(
            X[rows], u_feat, u_cut, max_depth
        )
        sl = slice(0, n_nodes)
        shift = lambda a: np.where(a[sl] >= 0, a[sl] + offset, -1)  # noqa: E731
        parts.append((feature[sl], split[sl], shift(left), shift(right), size[sl]))
        roots.append(offset)
        offset += n_nodes
    feature, split, left, right, size = (np.concatenate(p) for p in zip(*parts))
    return IsolationForestModel(
        feature=feature,
        split=split,
        left=left,
        right=right,
        leaf_size=size,
        roots=np.array(roots, dtype=np.int64),
        subsample_size=psi,
        c_norm=average_path_length(psi),
        n_features=d,
    )
