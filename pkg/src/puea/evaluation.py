"""Confusion matrices, metrics, k-fold cross-validation and the experiment grid.

The positive class is the attack: a true positive is an emulated-PU slot
flagged as an outlier, a false positive is a genuine PU slot flagged.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .config import RunConfig
from .features import ATTACK_LABEL, PU_LABEL, Dataset, DatasetError, dataset_from_energies
from .oneclass import DetectorKind, DetectorParams, FittedDetector, fit_detector
from .scenario import Placement, Source, generate_topology, simulate_energies

log = logging.getLogger(__name__)

HOLDOUT_K = 0  # ``k`` value written for fit-on-PU / test-on-mix rows


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: frozenset = field(default_factory=frozenset)  # metric names with a zero denominator

    def as_percent(self) -> tuple[float, float, float, float]:
        return tuple(100.0 * v for v in (self.accuracy, self.precision, self.recall, self.f1))


@dataclass(frozen=True)
class CvReport:
    k: int
    per_fold: tuple[MetricsReport, ...]
    mean: MetricsReport
    fold_sizes: tuple[int, ...]


def confusion(predictions, labels) -> ConfusionMatrix:
    """``predictions`` are is-outlier flags; ``labels`` are +1 (PU) / -1 (attack)."""
    pred = np.asarray(predictions, dtype=bool).reshape(-1)
    lab = np.asarray(labels).reshape(-1)
    if len(pred) != len(lab):
        raise ValueError(f"{len(pred)} predictions for {len(lab)} labels")
    if not np.all(np.isin(lab, (PU_LABEL, ATTACK_LABEL))):
        raise ValueError("labels must be +1 or -1")
    attack = lab == ATTACK_LABEL
    return ConfusionMatrix(
        tp=int(np.sum(pred & attack)),
        fp=int(np.sum(pred & ~attack)),
        tn=int(np.sum(~pred & ~attack)),
        fn=int(np.sum(~pred & attack)),
    )


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Accuracy, precision, recall and F1; a zero denominator yields 0 and is listed in ``undefined``."""
    if cm.n <= 0:
        raise ValueError("no evaluated examples")
    undefined = set()

    def ratio(num, den, name):
        if den == 0:
            undefined.add(name)
            return 0.0
        return num / den

    acc = (cm.tp + cm.tn) / cm.n
    prec = ratio(cm.tp, cm.tp + cm.fp, "precision")
    rec = ratio(cm.tp, cm.tp + cm.fn, "recall")
    f1 = ratio(2.0 * prec * rec, prec + rec, "f1")
    return MetricsReport(acc, prec, rec, f1, frozenset(undefined))


def mean_metrics(reports) -> MetricsReport:
    reports = list(reports)
    arr = np.array([[r.accuracy, r.precision, r.recall, r.f1] for r in reports])
    undefined = frozenset().union(*(r.undefined for r in reports))
    return MetricsReport(*map(float, arr.mean(axis=0)), undefined)


def evaluate_detector(det: FittedDetector, ds: Dataset) -> tuple[ConfusionMatrix, MetricsReport]:
    ds.require_nonempty()
    cm = confusion(det.predict_many(ds.X), ds.labels)
    return cm, metrics(cm)


class FitCache:
    """Memo of calibrated detectors keyed by (kind, params, training bytes).

    Grid cells that share a training matrix (same PU data, same fold split)
    reuse one fit instead of repeating it.
    """

    def __init__(self):
        self._store: dict[tuple, FittedDetector] = {}
        self.hits = 0

    def fit(self, kind: DetectorKind, X: np.ndarray, params: DetectorParams) -> FittedDetector:
        X = np.ascontiguousarray(X, dtype=np.float64)
        key = (kind, params, X.shape, hashlib.sha1(X.tobytes()).hexdigest())
        det = self._store.get(key)
        if det is None:
            det = fit_detector(kind, X, params)
            self._store[key] = det
        else:
            self.hits += 1
        return det

    def __len__(self):
        return len(self._store)


def fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Shuffle ``range(n)`` with ``seed`` and cut into ``k`` folds whose sizes differ by at most one."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def kfold_cv(
    ds: Dataset,
    k: int,
    kind: DetectorKind | str,
    params: DetectorParams | None = None,
    seed: int = 0,
    cache: FitCache | None = None,
) -> CvReport:
    """Fit on the PU rows of k-1 folds, evaluate on the held-out fold, rotate."""
    kind = DetectorKind.parse(kind)
    params = params or DetectorParams()
    n = len(ds)
    if not 2 <= k <= n - 1:
        raise ValueError(f"k must lie in [2, {n - 1}] for {n} examples, got {k}")
    if not (np.any(ds.labels == PU_LABEL) and np.any(ds.labels == ATTACK_LABEL)):
        raise DatasetError("cross-validation needs both PU (+1) and attack (-1) examples")
    fit = cache.fit if cache is not None else (lambda kd, X, p: fit_detector(kd, X, p))
    folds = fold_indices(n, k, seed)
    splits = []
    for i in range(k):
        train_idx = np.sort(np.concatenate([f for j, f in enumerate(folds) if j != i]))
        train_idx = train_idx[ds.labels[train_idx] == PU_LABEL]
        if len(train_idx) == 0:
            raise DatasetError(f"fold {i + 1}/{k}: training split has no PU (+1) examples")
        splits.append(train_idx)
    per_fold = []
    for train_idx, test_idx in zip(splits, folds):
        det = fit(kind, ds.X[train_idx], params)
        _, rep = evaluate_detector(det, ds.subset(test_idx))
        per_fold.append(rep)
    return CvReport(k, tuple(per_fold), mean_metrics(per_fold), tuple(len(f) for f in folds))


# ---------------------------------------------------------------- experiment grid


@dataclass(frozen=True)
class ReportRow:
    placement: str
    d: float
    sigma2_attacker: float
    puea_pct: float
    detector: str
    k: int
    metrics: MetricsReport

    def csv_fields(self) -> list[str]:
        acc, prec, rec, f1 = self.metrics.as_percent()
        return [
            self.placement,
            format(self.d, "g"),
            format(self.sigma2_attacker, "g"),
            format(self.puea_pct, "g"),
            self.detector,
            str(self.k),
            *(format(v, ".6f") for v in (acc, prec, rec, f1)),
        ]


REPORT_HEADER = ("placement", "D", "sigma2_attacker", "puea_pct", "detector", "k",
                 "accuracy", "precision", "recall", "f1")


@dataclass
class ExperimentReport:
    rows: list[ReportRow]

    def select(self, **where) -> list[ReportRow]:
        def keep(r):
            return all(getattr(r, key) == val for key, val in where.items())

        return [r for r in self.rows if keep(r)]

    def to_csv(self) -> str:
        lines = [",".join(REPORT_HEADER)]
        lines += [",".join(r.csv_fields()) for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        head = ("placement", "D", "s2_att", "pct", "det", "k", "acc%", "prec%", "rec%", "f1%")
        body = [r.csv_fields() for r in self.rows]
        for row in body:
            row[5] = "hold" if row[5] == str(HOLDOUT_K) else row[5]
            row[6:] = [f"{float(v):.2f}" for v in row[6:]]
        widths = [max(len(h), *(len(b[i]) for b in body)) if body else len(h) for i, h in enumerate(head)]
        fmt = "  ".join(f"{{:>{w}}}" for w in widths)
        return "\n".join([fmt.format(*head)] + [fmt.format(*b) for b in body]) + "\n"


@dataclass(frozen=True)
class Cell:
    placement: Placement
    d: float
    sigma2_attacker: float
    puea_pct: float
    detector: DetectorKind

    def describe(self) -> str:
        return (f"placement={self.placement.value} D={self.d:g} sigma2={self.sigma2_attacker:g} "
                f"pct={self.puea_pct:g} detector={self.detector.label}")


class ExperimentCellError(RuntimeError):
    def __init__(self, cell: Cell, cause: Exception):
        super().__init__(f"{cell.describe()}: {cause}")
        self.cell = cell


def iter_cells(cfg: RunConfig) -> Iterator[Cell]:
    for placement in cfg.placements:
        for pct in cfg.puea_pct:
            for d in cfg.d_list:
                for s2 in cfg.sigma2_attacker:
                    for kind in cfg.detectors:
                        yield Cell(placement, d, s2, pct, kind)


def attack_count(n_slots: int, pct: float) -> int:
    return max(1, int(round(n_slots * pct / 100.0)))


def make_topology(cfg: RunConfig, placement: Placement, d: float, sigma2_attacker: float):
    return generate_topology(
        cfg.n_sus, placement, d, cfg.seed,
        region=cfg.region,
        pu_power=cfg.pt_pu, pu_sigma2=cfg.sigma2_pu,
        attacker_power=cfg.pt_attacker, attacker_sigma2=sigma2_attacker,
        outside_pu=(cfg.outside_pu_x, cfg.outside_pu_y),
        channel=cfg.channel,
    )


def pu_dataset(cfg: RunConfig, topology) -> Dataset:
    energies = simulate_energies(topology, Source.PU, cfg.n_slots, cfg.channel, cfg.seed)
    return dataset_from_energies(energies, PU_LABEL)


def attack_dataset(cfg: RunConfig, topology, num_slots: int) -> Dataset:
    energies = simulate_energies(topology, Source.ATTACKER, num_slots, cfg.channel, cfg.seed)
    return dataset_from_energies(energies, ATTACK_LABEL)


def run_experiment(cfg: RunConfig, *, cache: FitCache | None = None, progress=None) -> ExperimentReport:
    """Every (placement, pct, D, sigma2, detector) cell: a holdout row then one CV row per k.

    Rows come out in the fixed order of ``iter_cells`` regardless of how the
    fits are shared.
    """
    cache = cache if cache is not None else FitCache()
    params = cfg.detector_params()
    rows: list[ReportRow] = []
    pu_cache: dict[Placement, Dataset] = {}
    for cell in iter_cells(cfg):
        try:
            topo = make_topology(cfg, cell.placement, cell.d, cell.sigma2_attacker)
            if cell.placement not in pu_cache:
                pu_cache[cell.placement] = pu_dataset(cfg, topo)
            train = pu_cache[cell.placement]
            attack = attack_dataset(cfg, topo, attack_count(cfg.n_slots, cell.puea_pct))
            test = train.concat(attack)
            common = dict(placement=cell.placement.value, d=cell.d, sigma2_attacker=cell.sigma2_attacker,
                          puea_pct=cell.puea_pct, detector=cell.detector.label)
            det = cache.fit(cell.detector, train.X, params)
            _, rep = evaluate_detector(det, test)
            rows.append(ReportRow(k=HOLDOUT_K, metrics=rep, **common))
            for k in cfg.k_list:
                cv = kfold_cv(test, k, cell.detector, params, cfg.seed, cache)
                rows.append(ReportRow(k=k, metrics=cv.mean, **common))
        except Exception as exc:
            raise ExperimentCellError(cell, exc) from exc
        if progress is not None:
            progress(cell)
        log.debug("done %s", cell.describe())
    return ExperimentReport(rows)
