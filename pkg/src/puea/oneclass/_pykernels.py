"""Numpy implementations of the hot loops.

Same signatures and the same arithmetic order as the compiled ``_kernels``
module; used when the extension is unavailable or ``PUEA_PURE_PYTHON=1``.
"""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

_CHUNK = 64


def knn(queries, train, k, skip_self=False):
    """Exact k nearest training rows for every query, ordered by (distance, index).

    With ``skip_self`` the queries are the training rows themselves and row i
    never counts as its own neighbour.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    train = np.ascontiguousarray(train, dtype=np.float64)
    nq, m = len(queries), len(train)
    avail = m - 1 if skip_self else m
    if k < 1 or k > avail:
        raise ValueError(f"k={k} out of range for {avail} candidate neighbours")
    idx_out = np.empty((nq, k), dtype=np.int64)
    d_out = np.empty((nq, k), dtype=np.float64)
    for start in range(0, nq, _CHUNK):
        q = queries[start:start + _CHUNK]
        d2 = ((q[:, None, :] - train[None, :, :]) ** 2).sum(axis=-1)
        rows = np.arange(len(q))
        if skip_self:
            d2[rows, rows + start] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        kth = d2[rows[:, None], part].max(axis=1)
        crowded = np.count_nonzero(d2 <= kth[:, None], axis=1) > k
        for r in np.flatnonzero(crowded):
            part[r] = np.argsort(d2[r], kind="stable")[:k]
        pd = d2[rows[:, None], part]
        o = np.lexsort((part, pd), axis=-1)
        idx_out[start:start + len(q)] = np.take_along_axis(part, o, axis=1)
        d_out[start:start + len(q)] = np.take_along_axis(pd, o, axis=1)
    return idx_out, np.sqrt(d_out)


def build_itree(X, u_feat, u_cut, max_depth):
    """Grow one isolation tree on ``X`` using pre-drawn uniforms indexed by node id.

    Returns ``(feature, threshold, left, right, size, n_nodes)``; leaves have
    ``feature == -1``.
    """
    n, d = X.shape
    cap = len(u_feat)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    size = np.zeros(cap, dtype=np.int64)
    n_nodes = 1
    stack = [(0, np.arange(n), 0)]
    while stack:
        node, members, depth = stack.pop()
        size[node] = len(members)
        if len(members) <= 1 or depth >= max_depth:
            continue
        sub = X[members]
        lo = sub.min(axis=0)
        hi = sub.max(axis=0)
        live = np.flatnonzero(hi > lo)
        if len(live) == 0:
            continue
        pick = min(int(u_feat[node] * len(live)), len(live) - 1)
        f = int(live[pick])
        cut = lo[f] + u_cut[node] * (hi[f] - lo[f])
        go_left = sub[:, f] < cut
        feature[node] = f
        threshold[node] = cut
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        stack.append((right[node], members[~go_left], depth + 1))
        stack.append((left[node], members[go_left], depth + 1))
    return feature, threshold, left, right, size, n_nodes


def forest_path_length(X, feature, threshold, left, right, leaf_adj, roots):
    """Mean over trees of (leaf depth + leaf adjustment) for every row of ``X``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = len(X)
    total = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.int64)
        depth = np.zeros(n)
        active = feature[node] >= 0
        while active.any():
            a = rows[active]
            nd = node[a]
            go_left = X[a, feature[nd]] < threshold[nd]
            node[a] = np.where(go_left, left[nd], right[nd])
            depth[a] += 1.0
            active[a] = feature[node[a]] >= 0
        total += depth + leaf_adj[node]
    return total / len(roots)


class _RowCache:
    def __init__(self, X, gamma, capacity):
        self.X = X
        self.gamma = gamma
        self.capacity = max(2, capacity)
        self.rows = OrderedDict()

    def __call__(self, i):
        row = self.rows.get(i)
        if row is not None:
            self.rows.move_to_end(i)
            return row
        diff = self.X - self.X[i]
        row = np.exp(-self.gamma * (diff * diff).sum(axis=1))
        if len(self.rows) >= self.capacity:
            self.rows.popitem(last=False)
        self.rows[i] = row
        return row


def smo_one_class(X, gamma, C, tol, max_iter, cache_rows, alpha0):
    """Maximal-violating-pair SMO for the scaled one-class dual.

    Returns ``(alpha, grad, n_iter, gap)`` where ``grad = K @ alpha`` and
    ``gap`` is the final KKT violation.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    m = len(X)
    alpha = np.array(alpha0, dtype=np.float64)
    row = _RowCache(X, gamma, cache_rows)
    grad = np.zeros(m)
    for i in np.flatnonzero(alpha > 0):
        grad += alpha[i] * row(int(i))
    n_iter = 0
    gap = np.inf
    while True:
        up = np.where(alpha < C, grad, np.inf)
        low = np.where(alpha > 0, grad, -np.inf)
        i = int(np.argmin(up))
        j = int(np.argmax(low))
        gap = low[j] - up[i]
        if gap <= tol or n_iter >= max_iter:
            break
        Ki = row(i)
        Kj = row(j)
        eta = 2.0 - 2.0 * Ki[j]
        if eta <= 0.0:
            eta = 1e-12
        delta = gap / eta
        room_i = C - alpha[i]
        room_j = alpha[j]
        if delta >= room_i or delta >= room_j:
            if room_i <= room_j:
                delta = room_i
                alpha[i] = C
                alpha[j] -= delta
            else:
                delta = room_j
                alpha[j] = 0.0
                alpha[i] += delta
        else:
            alpha[i] += delta
            alpha[j] -= delta
        grad += delta * (Ki - Kj)
        n_iter += 1
    return alpha, grad, n_iter, float(gap)


def scatter(X, idx):
    """Batched mean ``(B, d)`` and divide-by-count covariance ``(B, d, d)`` of ``X[idx[b]]``."""
    sub = X[idx]
    mu = sub.mean(axis=1)
    c = sub - mu[:, None, :]
    cov = np.matmul(np.swapaxes(c, -1, -2), c) / idx.shape[1]
    return mu, cov


def mahalanobis_sq(X, mu, prec):
    """Batched squared Mahalanobis distances ``(B, m)`` of every row of ``X``."""
    diff = X[None, :, :] - mu[:, None, :]
    return (np.matmul(diff, prec) * diff).sum(axis=-1)


def rbf_decision(X, sv, coef, gamma):
    """``sum_j coef_j exp(-gamma ||x - sv_j||^2)`` for every row of ``X``."""
    out = np.empty(len(X))
    for start in range(0, len(X), 256):
        diff = X[start:start + 256, None, :] - sv[None, :, :]
        K = np.exp(-gamma * (diff * diff).sum(axis=-1))
        out[start:start + 256] = K @ coef
    return out
