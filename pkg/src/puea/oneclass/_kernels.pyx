# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops for the one-class detectors.

Mirrors ``_pykernels`` function for function, with the same arithmetic order.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, INFINITY

cnp.import_array()


def knn(queries, train, Py_ssize_t k, bint skip_self=False):
    """Exact neighbours, ordered by (squared distance, index).

    Training rows are visited outward from the query along the widest axis and
    the scan stops once that axis alone rules out any closer row, so the result
    is the same as a full scan.
    """
    cdef const double[:, ::1] Q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef const double[:, ::1] T = np.ascontiguousarray(train, dtype=np.float64)
    cdef Py_ssize_t nq = Q.shape[0], m = T.shape[0], d = T.shape[1]
    cdef Py_ssize_t avail = m - 1 if skip_self else m
    if k < 1 or k > avail:
        raise ValueError(f"k={k} out of range for {avail} candidate neighbours")
    cdef Py_ssize_t axis = int(np.argmax(np.asarray(T).var(axis=0))) if m > 1 else 0
    order_arr = np.argsort(np.asarray(T)[:, axis], kind="stable").astype(np.int64)
    cdef const cnp.int64_t[::1] order = order_arr
    proj_arr = np.ascontiguousarray(np.asarray(T)[order_arr, axis])
    cdef const double[::1] proj = proj_arr
    idx_arr = np.empty((nq, k), dtype=np.int64)
    dist_arr = np.empty((nq, k), dtype=np.float64)
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef double[:, ::1] dist = dist_arr
    cdef Py_ssize_t q, j, t, p, filled, lo, hi, pos, cand
    cdef double d2, diff, qa, gap_lo, gap_hi, gap
    cdef bint take_lo
    with nogil:
        for q in range(nq):
            filled = 0
            qa = Q[q, axis]
            # first sorted position with proj >= qa
            lo = 0
            hi = m
            while lo < hi:
                pos = (lo + hi) // 2
                if proj[pos] < qa:
                    lo = pos + 1
                else:
                    hi = pos
            hi = lo
            lo = lo - 1
            while lo >= 0 or hi < m:
                if lo >= 0:
                    gap_lo = qa - proj[lo]
                if hi < m:
                    gap_hi = proj[hi] - qa
                if lo < 0:
                    take_lo = False
                elif hi >= m:
                    take_lo = True
                else:
                    take_lo = gap_lo <= gap_hi
                if take_lo:
                    gap = gap_lo
                    cand = order[lo]
                    lo -= 1
                else:
                    gap = gap_hi
                    cand = order[hi]
                    hi += 1
                if filled == k and gap * gap > dist[q, k - 1]:
                    break
                if skip_self and cand == q:
                    continue
                d2 = 0.0
                for t in range(d):
                    diff = Q[q, t] - T[cand, t]
                    d2 = d2 + diff * diff
                if filled == k and (d2 > dist[q, k - 1] or (d2 == dist[q, k - 1] and cand > idx[q, k - 1])):
                    continue
                p = filled if filled < k else k - 1
                while p > 0 and (dist[q, p - 1] > d2 or (dist[q, p - 1] == d2 and idx[q, p - 1] > cand)):
                    dist[q, p] = dist[q, p - 1]
                    idx[q, p] = idx[q, p - 1]
                    p -= 1
                dist[q, p] = d2
                idx[q, p] = cand
                if filled < k:
                    filled += 1
            for t in range(k):
                dist[q, t] = sqrt(dist[q, t])
    return idx_arr, dist_arr


def build_itree(X, u_feat, u_cut, Py_ssize_t max_depth):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] uf = np.ascontiguousarray(u_feat, dtype=np.float64)
    cdef const double[::1] uc = np.ascontiguousarray(u_cut, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], cap = uf.shape[0]
    feature_arr = np.full(cap, -1, dtype=np.int64)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int64)
    right_arr = np.full(cap, -1, dtype=np.int64)
    size_arr = np.zeros(cap, dtype=np.int64)
    cdef cnp.int64_t[::1] feature = feature_arr, left = left_arr, right = right_arr
    cdef cnp.int64_t[::1] size = size_arr
    cdef double[::1] threshold = threshold_arr
    members_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] members = members_arr
    # explicit stack of (node, begin, end, depth); members[begin:end] belong to node
    stack_arr = np.empty((cap + 1, 4), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] stack = stack_arr
    lo_arr = np.empty(d, dtype=np.float64)
    hi_arr = np.empty(d, dtype=np.float64)
    live_arr = np.empty(d, dtype=np.int64)
    cdef double[::1] lo = lo_arr, hi = hi_arr
    cdef cnp.int64_t[::1] live = live_arr
    cdef Py_ssize_t top = 0, node, begin, end, depth, i, f, nlive, pick, a, b, n_nodes = 1
    cdef cnp.int64_t tmp
    cdef double v, cut
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    with nogil:
        while top > 0:
            top -= 1
            node = stack[top, 0]
            begin = stack[top, 1]
            end = stack[top, 2]
            depth = stack[top, 3]
            size[node] = end - begin
            if end - begin <= 1 or depth >= max_depth:
                continue
            for f in range(d):
                lo[f] = x[members[begin], f]
                hi[f] = lo[f]
            for i in range(begin + 1, end):
                for f in range(d):
                    v = x[members[i], f]
                    if v < lo[f]:
                        lo[f] = v
                    if v > hi[f]:
                        hi[f] = v
            nlive = 0
            for f in range(d):
                if hi[f] > lo[f]:
                    live[nlive] = f
                    nlive += 1
            if nlive == 0:
                continue
            pick = <Py_ssize_t>(uf[node] * nlive)
            if pick > nlive - 1:
                pick = nlive - 1
            f = live[pick]
            cut = lo[f] + uc[node] * (hi[f] - lo[f])
            a = begin
            b = end - 1
            while a <= b:
                if x[members[a], f] < cut:
                    a += 1
                else:
                    tmp = members[a]
                    members[a] = members[b]
                    members[b] = tmp
                    b -= 1
            feature[node] = f
            threshold[node] = cut
            left[node] = n_nodes
            right[node] = n_nodes + 1
            n_nodes += 2
            stack[top, 0] = right[node]
            stack[top, 1] = a
            stack[top, 2] = end
            stack[top, 3] = depth + 1
            top += 1
            stack[top, 0] = left[node]
            stack[top, 1] = begin
            stack[top, 2] = a
            stack[top, 3] = depth + 1
            top += 1
    return feature_arr, threshold_arr, left_arr, right_arr, size_arr, n_nodes


def forest_path_length(X, feature, threshold, left, right, leaf_adj, roots):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const cnp.int64_t[::1] feat = np.ascontiguousarray(feature, dtype=np.int64)
    cdef const double[::1] thr = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const cnp.int64_t[::1] lft = np.ascontiguousarray(left, dtype=np.int64)
    cdef const cnp.int64_t[::1] rgt = np.ascontiguousarray(right, dtype=np.int64)
    cdef const double[::1] adj = np.ascontiguousarray(leaf_adj, dtype=np.float64)
    cdef const cnp.int64_t[::1] rts = np.ascontiguousarray(roots, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], ntree = rts.shape[0], i, t, node
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double depth
    with nogil:
        for t in range(ntree):
            for i in range(n):
                node = rts[t]
                depth = 0.0
                while feat[node] >= 0:
                    if x[i, feat[node]] < thr[node]:
                        node = lft[node]
                    else:
                        node = rgt[node]
                    depth = depth + 1.0
                out[i] = out[i] + (depth + adj[node])
        for i in range(n):
            out[i] = out[i] / ntree
    return out_arr


cdef class _RowCache:
    cdef const double[:, ::1] X
    cdef double gamma
    cdef double[:, ::1] rows
    cdef cnp.int64_t[::1] slot_of, owner, stamp
    cdef Py_ssize_t capacity, used, clock
    cdef object _keep

    def __init__(self, X, double gamma, Py_ssize_t capacity):
        cdef Py_ssize_t m = X.shape[0]
        self.X = X
        self.gamma = gamma
        self.capacity = max(2, min(capacity, m))
        self._keep = [np.empty((self.capacity, m), dtype=np.float64),
                      np.full(m, -1, dtype=np.int64),
                      np.full(self.capacity, -1, dtype=np.int64),
                      np.zeros(self.capacity, dtype=np.int64)]
        self.rows = self._keep[0]
        self.slot_of = self._keep[1]
        self.owner = self._keep[2]
        self.stamp = self._keep[3]
        self.used = 0
        self.clock = 0

    cdef Py_ssize_t get(self, Py_ssize_t i, Py_ssize_t pinned) noexcept nogil:
        """Slot holding kernel row i; never evicts slot ``pinned``."""
        cdef Py_ssize_t s = self.slot_of[i], t, j, m = self.X.shape[0], d = self.X.shape[1]
        cdef double acc, diff
        self.clock += 1
        if s >= 0:
            self.stamp[s] = self.clock
            return s
        if self.used < self.capacity:
            s = self.used
            self.used += 1
        else:
            s = -1
            for t in range(self.capacity):
                if t == pinned:
                    continue
                if s < 0 or self.stamp[t] < self.stamp[s]:
                    s = t
            self.slot_of[self.owner[s]] = -1
        for j in range(m):
            acc = 0.0
            for t in range(d):
                diff = self.X[j, t] - self.X[i, t]
                acc = acc + diff * diff
            self.rows[s, j] = exp(-self.gamma * acc)
        self.owner[s] = i
        self.slot_of[i] = s
        self.stamp[s] = self.clock
        return s


def smo_one_class(X, double gamma, double C, double tol, Py_ssize_t max_iter,
                  Py_ssize_t cache_rows, alpha0):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t m = x.shape[0], i, j, t, si, sj, n_iter = 0
    alpha_arr = np.array(alpha0, dtype=np.float64)
    grad_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] grad = grad_arr
    cdef _RowCache cache = _RowCache(x, gamma, cache_rows)
    cdef double best_up, best_low, gap = INFINITY, eta, delta, room_i, room_j, ai
    with nogil:
        for i in range(m):
            if alpha[i] > 0:
                si = cache.get(i, -1)
                ai = alpha[i]
                for t in range(m):
                    grad[t] = grad[t] + ai * cache.rows[si, t]
        while True:
            i = -1
            j = -1
            best_up = INFINITY
            best_low = -INFINITY
            for t in range(m):
                if alpha[t] < C and grad[t] < best_up:
                    best_up = grad[t]
                    i = t
                if alpha[t] > 0 and grad[t] > best_low:
                    best_low = grad[t]
                    j = t
            gap = best_low - best_up
            if gap <= tol or n_iter >= max_iter:
                break
            si = cache.get(i, -1)
            sj = cache.get(j, si)
            eta = 2.0 - 2.0 * cache.rows[si, j]
            if eta <= 0.0:
                eta = 1e-12
            delta = gap / eta
            room_i = C - alpha[i]
            room_j = alpha[j]
            if delta >= room_i or delta >= room_j:
                if room_i <= room_j:
                    delta = room_i
                    alpha[i] = C
                    alpha[j] = alpha[j] - delta
                else:
                    delta = room_j
                    alpha[j] = 0.0
                    alpha[i] = alpha[i] + delta
            else:
                alpha[i] = alpha[i] + delta
                alpha[j] = alpha[j] - delta
            for t in range(m):
                grad[t] = grad[t] + delta * (cache.rows[si, t] - cache.rows[sj, t])
            n_iter += 1
    return alpha_arr, grad_arr, n_iter, float(gap)


def scatter(X, idx):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] ix = np.ascontiguousarray(idx, dtype=np.int64)
    cdef Py_ssize_t B = ix.shape[0], h = ix.shape[1], d = x.shape[1], b, r, i, j
    mu_arr = np.zeros((B, d), dtype=np.float64)
    cov_arr = np.zeros((B, d, d), dtype=np.float64)
    cdef double[:, ::1] mu = mu_arr
    cdef double[:, :, ::1] cov = cov_arr
    cdef double[::1] c = np.empty(d, dtype=np.float64)
    with nogil:
        for b in range(B):
            for r in range(h):
                for i in range(d):
                    mu[b, i] += x[ix[b, r], i]
            for i in range(d):
                mu[b, i] /= h
            for r in range(h):
                for i in range(d):
                    c[i] = x[ix[b, r], i] - mu[b, i]
                for i in range(d):
                    for j in range(i + 1):
                        cov[b, i, j] += c[i] * c[j]
            for i in range(d):
                for j in range(i + 1):
                    cov[b, i, j] /= h
                    cov[b, j, i] = cov[b, i, j]
    return mu_arr, cov_arr


def mahalanobis_sq(X, mu, prec):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] m_ = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[:, :, ::1] p = np.ascontiguousarray(prec, dtype=np.float64)
    cdef Py_ssize_t B = m_.shape[0], n = x.shape[0], d = x.shape[1], b, r, i, j
    out_arr = np.empty((B, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] c = np.empty(d, dtype=np.float64)
    cdef double acc, row
    with nogil:
        for b in range(B):
            for r in range(n):
                for i in range(d):
                    c[i] = x[r, i] - m_[b, i]
                acc = 0.0
                for i in range(d):
                    row = 0.0
                    for j in range(d):
                        row = row + p[b, i, j] * c[j]
                    acc = acc + c[i] * row
                out[b, r] = acc
    return out_arr


def rbf_decision(X, sv, coef, double gamma):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] s = np.ascontiguousarray(sv, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], ns = s.shape[0], d = x.shape[1], i, j, t
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double acc, d2, diff
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(ns):
                d2 = 0.0
                for t in range(d):
                    diff = x[i, t] - s[j, t]
                    d2 = d2 + diff * diff
                acc = acc + a[j] * exp(-gamma * d2)
            out[i] = acc
    return out_arr
