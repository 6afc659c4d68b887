from __future__ import annotations

import math

import numpy as np
import pytest

from puea.oneclass import DegenerateDataError, LofParams, fit_lof
from puea.oneclass.lof import LRD_CAP


# ---------------------------------------------------------------- brute-force oracle
# Plain-Python LOF straight from the definitions, used as an independent check.


def _sqdist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b))


def _neighbours(point, pool, k, skip=None):
    cand = [(_sqdist(point, q), j) for j, q in enumerate(pool) if j != skip]
    cand.sort()
    return [(math.sqrt(d2), j) for d2, j in cand[:k]]


def _lrd_from(neigh, kdist):
    mean_reach = sum(max(kdist[j], d) for d, j in neigh) / len(neigh)
    return LRD_CAP if mean_reach == 0 else min(1.0 / mean_reach, LRD_CAP)


def oracle_lof(train, queries, k):
    train = [list(map(float, r)) for r in train]
    neigh = [_neighbours(p, train, k, skip=i) for i, p in enumerate(train)]
    kdist = [n[-1][0] for n in neigh]
    lrd = [_lrd_from(n, kdist) for n in neigh]
    out = []
    for q in queries:
        nq = _neighbours(list(map(float, q)), train, k)
        lrd_q = _lrd_from(nq, kdist)
        out.append(sum(lrd[j] / lrd_q for _, j in nq) / k)
    train_lof = [sum(lrd[j] / lrd[i] for _, j in neigh[i]) / k for i in range(len(train))]
    return np.array(out), np.array(train_lof), np.array(kdist), np.array(lrd)


def _instance(rng):
    m = int(rng.integers(3, 51))
    k = int(rng.integers(1, min(10, m - 1) + 1))
    d = int(rng.integers(1, 6))
    X = rng.normal(size=(m, d)) * rng.uniform(0.1, 10)
    Q = rng.normal(size=(int(rng.integers(1, 8)), d)) * 2
    if rng.random() < 0.3:
        # integer grids produce many exact distance ties
        X, Q = np.round(X), np.round(Q)
    if rng.random() < 0.3:
        Q = np.vstack([Q, X[: min(3, m)]])  # queries that coincide with training rows
    return X, Q, k


def test_oracle_agreement_200_instances(backend):
    rng = np.random.default_rng(2024)
    for _ in range(200):
        X, Q, k = _instance(rng)
        model = fit_lof(X, LofParams(k))
        expect, expect_train, kdist, lrd = oracle_lof(X, Q, k)
        assert np.allclose(model.k_distance, kdist, rtol=0, atol=1e-9)
        assert np.allclose(model.lrd, lrd, rtol=1e-9, atol=1e-9)
        assert np.allclose(model.score_many(Q), expect, rtol=1e-9, atol=1e-9)
        assert np.allclose(model.training_scores(X), expect_train, rtol=1e-9, atol=1e-9)


def test_grid_interior_scores_near_one():
    g = np.array([(i, j) for i in range(10) for j in range(10)], dtype=float)
    model = fit_lof(g, LofParams(4))
    inner = [i * 10 + j for i in range(1, 9) for j in range(1, 9)]
    expect, expect_train, _, _ = oracle_lof(g, g[inner], 4)
    assert np.allclose(model.training_scores(g)[inner], expect_train[inner], atol=1e-12)
    assert np.all(np.abs(model.training_scores(g)[inner] - 1) <= 0.1)
    assert np.all(np.abs(model.score_many(g[inner]) - 1) <= 0.1)


def test_query_on_training_point_inside_uniform_cluster(rng):
    X = rng.uniform(0, 1, size=(400, 2))
    model = fit_lof(X, LofParams(20))
    centre = np.argmin(np.linalg.norm(X - 0.5, axis=1))
    assert model.score(X[centre]) == pytest.approx(1.0, abs=0.15)
    assert model.score([5.0, 5.0]) > 3


def test_duplicates_hit_the_lrd_cap():
    X = np.vstack([np.zeros((5, 2)), np.ones((5, 2)) * 3, [[10.0, 10.0]]])
    model = fit_lof(X, LofParams(3))
    assert np.all(np.isfinite(model.lrd))
    assert model.lrd[0] == LRD_CAP
    assert np.isfinite(model.score([0.0, 0.0]))
    assert model.score([0.0, 0.0]) == pytest.approx(1.0)


def test_k_must_be_below_m():
    with pytest.raises(DegenerateDataError):
        fit_lof(np.zeros((5, 2)) + np.arange(5)[:, None], LofParams(5))


def test_tie_break_lowest_index():
    # two training points equidistant from the query; only k=1 neighbour kept
    X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 5.0], [0.0, -5.0]])
    model = fit_lof(X, LofParams(1))
    expect, *_ = oracle_lof(X, [[0.0, 0.0]], 1)
    assert model.score([0.0, 0.0]) == pytest.approx(expect[0], abs=1e-12)
