from __future__ import annotations

import numpy as np
import pytest

from puea.config import RunConfig
from puea.evaluation import (
    HOLDOUT_K,
    ConfusionMatrix,
    ExperimentCellError,
    FitCache,
    attack_count,
    confusion,
    evaluate_detector,
    fold_indices,
    iter_cells,
    kfold_cv,
    mean_metrics,
    metrics,
    run_experiment,
)
from puea.features import Dataset, DatasetError
from puea.oneclass import DetectorParams, IForestParams, McdParams
from puea.oneclass.mcd import McdModel
from puea.scenario import Placement


def test_confusion_examples():
    assert confusion([True], [-1]) == ConfusionMatrix(tp=1)
    assert confusion([True], [1]) == ConfusionMatrix(fp=1)
    assert confusion([False], [-1]) == ConfusionMatrix(fn=1)
    assert confusion([False], [1]) == ConfusionMatrix(tn=1)
    with pytest.raises(ValueError):
        confusion([True, False], [1])
    with pytest.raises(ValueError):
        confusion([True], [0])


def test_metrics_examples():
    r = metrics(ConfusionMatrix(tp=9, fp=1, fn=1, tn=89))
    assert (r.accuracy, r.precision, r.recall, r.f1) == pytest.approx((0.98, 0.9, 0.9, 0.9), abs=1e-15)
    assert not r.undefined
    r = metrics(ConfusionMatrix(tn=5, fn=3))
    assert r.precision == 0 and "precision" in r.undefined
    r = metrics(ConfusionMatrix(tp=7))
    assert (r.accuracy, r.precision, r.recall, r.f1) == (1.0, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        metrics(ConfusionMatrix())


def test_metrics_identities_random():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 50, size=4))
        if tp + fp + tn + fn == 0:
            tn = 1
        n = tp + fp + tn + fn
        pred = np.array([True] * tp + [True] * fp + [False] * tn + [False] * fn)
        lab = np.array([-1] * tp + [1] * fp + [1] * tn + [-1] * fn)
        perm = rng.permutation(n)
        cm = confusion(pred[perm], lab[perm])
        assert (cm.tp, cm.fp, cm.tn, cm.fn) == (tp, fp, tn, fn)
        assert cm.n == n
        r = metrics(cm)
        assert abs(r.accuracy - (tp + tn) / n) <= 1e-12
        p = tp / (tp + fp) if tp + fp else 0.0
        rc = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * rc / (p + rc) if p + rc else 0.0
        assert abs(r.precision - p) <= 1e-12 and abs(r.recall - rc) <= 1e-12 and abs(r.f1 - f) <= 1e-12
        assert ("precision" in r.undefined) == (tp + fp == 0)
        assert ("recall" in r.undefined) == (tp + fn == 0)
        for v in (r.accuracy, r.precision, r.recall, r.f1):
            assert 0 <= v <= 1


@pytest.mark.parametrize("n,k", [(10, 2), (11, 3), (101, 10), (12_000, 20), (5, 4)])
def test_fold_properties(n, k):
    folds = fold_indices(n, k, seed=3)
    assert len(folds) == k
    allidx = np.concatenate(folds)
    assert np.array_equal(np.sort(allidx), np.arange(n))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert all(np.array_equal(a, b) for a, b in zip(folds, fold_indices(n, k, seed=3)))


def _toy_dataset(rng, n_pu=200, n_att=20, shift=6.0):
    X = np.vstack([rng.normal(size=(n_pu, 5)), rng.normal(size=(n_att, 5)) + shift])
    return Dataset(np.arange(n_pu + n_att), X, [1] * n_pu + [-1] * n_att)


def test_flag_everything_holdout(rng):
    ds = _toy_dataset(rng)
    det = McdModel(np.zeros(5), np.eye(5), np.eye(5), np.arange(3), threshold=-1.0)
    cm, r = evaluate_detector(det, ds)
    assert r.recall == 1.0
    assert r.accuracy == pytest.approx(20 / 220)
    assert cm.n == 220


def test_kfold_report_is_mean_of_folds(rng):
    ds = _toy_dataset(rng)
    cv = kfold_cv(ds, 5, "mcd", DetectorParams(mcd=McdParams(num_initial_subsets=30)), seed=1)
    assert cv.k == 5 and len(cv.per_fold) == 5 and sum(cv.fold_sizes) == len(ds)
    for name in ("accuracy", "precision", "recall", "f1"):
        vals = [getattr(r, name) for r in cv.per_fold]
        assert abs(getattr(cv.mean, name) - sum(vals) / len(vals)) <= 1e-12
    assert cv.mean.accuracy > 0.85  # separable toy data
    assert cv.mean == mean_metrics(cv.per_fold)


def test_kfold_errors(rng):
    ds = _toy_dataset(rng, 10, 2)
    with pytest.raises(ValueError):
        kfold_cv(ds, 1, "lof")
    with pytest.raises(ValueError):
        kfold_cv(ds, len(ds), "lof")
    only_pu = ds.subset(np.flatnonzero(ds.labels == 1))
    with pytest.raises(DatasetError, match="both"):
        kfold_cv(only_pu, 2, "lof")
    mostly_attack = Dataset(np.arange(6), np.random.default_rng(0).normal(size=(6, 5)), [1, -1, -1, -1, -1, -1])
    with pytest.raises(DatasetError, match="no PU"):
        kfold_cv(mostly_attack, 5, "lof")


def test_fit_cache_shares_fits(rng):
    ds = _toy_dataset(rng)
    cache = FitCache()
    params = DetectorParams(iforest=IForestParams(10, 64))
    a = kfold_cv(ds, 4, "iforest", params, seed=2, cache=cache)
    b = kfold_cv(ds, 4, "iforest", params, seed=2, cache=cache)
    assert len(cache) == 4 and cache.hits == 4
    assert a == b
    assert a == kfold_cv(ds, 4, "iforest", params, seed=2)


def test_attack_count():
    assert attack_count(10_000, 10) == 1000
    assert attack_count(10_000, 20) == 2000
    assert attack_count(5, 1) == 1


SMALL = dict(n_slots=300, d_list=(5.0,), sigma2_attacker=(8.0,), placements=(Placement.INSIDE,),
             puea_pct=(10.0,), k_list=(2, 5), iforest_trees=20, mcd_subsets=40)


def test_single_cell_grid_has_four_detector_rows():
    cfg = RunConfig(**SMALL)
    cells = list(iter_cells(cfg))
    assert len(cells) == 4
    report = run_experiment(cfg)
    holdout = report.select(k=HOLDOUT_K)
    assert [r.detector for r in holdout] == ["IF", "SVM", "MCD", "LOF"]
    assert len(report.rows) == 4 * 3
    header, *lines = report.to_csv().splitlines()
    assert header == "placement,D,sigma2_attacker,puea_pct,detector,k,accuracy,precision,recall,f1"
    assert lines[0].startswith("inside,5,8,10,IF,0,")
    assert "hold" in report.to_table()


def test_report_determinism():
    cfg = RunConfig(**SMALL)
    assert run_experiment(cfg).to_csv() == run_experiment(cfg, cache=FitCache()).to_csv()


def test_grid_order_and_size():
    cfg = RunConfig()
    cells = list(iter_cells(cfg))
    assert len(cells) == 2 * 2 * 3 * 3 * 4
    assert cells[0].describe() == "placement=inside D=5 sigma2=4 pct=10 detector=IF"


def test_cell_errors_carry_coordinates():
    cfg = RunConfig(**{**SMALL, "d_list": (500.0,)})
    with pytest.raises(ExperimentCellError, match="placement=inside D=500"):
        run_experiment(cfg)
