"""Per-slot feature extraction and labelled data sets with CSV persistence."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .scenario import SlotReport

FEATURE_NAMES = ("mean_db", "var_db", "median_db", "uq_db", "lq_db")
CSV_HEADER = ("slot_id",) + FEATURE_NAMES + ("label",)
FEATURE_DIM = len(FEATURE_NAMES)
PU_LABEL = 1
ATTACK_LABEL = -1


class DatasetError(ValueError):
    """Malformed or unusable data set."""


@dataclass(frozen=True)
class FeatureVector:
    mean: float
    variance: float
    median: float
    upper_quartile: float
    lower_quartile: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.mean, self.variance, self.median, self.upper_quartile, self.lower_quartile]
        )


@dataclass(frozen=True)
class Example:
    features: FeatureVector
    label: int

    def __post_init__(self):
        if self.label not in (PU_LABEL, ATTACK_LABEL):
            raise ValueError(f"label must be +1 or -1, got {self.label}")


def quantile(values, q):
    """Linear-interpolation quantile at position ``(len - 1) * q`` along the last axis.

    ``q`` may be a scalar or a sequence; works row-wise on 2-D input.
    """
    v = np.sort(np.asarray(values, dtype=float), axis=-1)
    n = v.shape[-1]
    if n == 0:
        raise ValueError("quantile of an empty sequence")
    qs = np.asarray(q, dtype=float)
    if np.any((qs < 0) | (qs > 1)) or np.any(np.isnan(qs)):
        raise ValueError(f"quantile fraction must lie in [0, 1], got {q}")
    pos = (n - 1) * qs
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    a = np.take(v, lo, axis=-1)
    b = np.take(v, hi, axis=-1)
    out = a + (b - a) * frac
    if out.ndim == 0:
        return float(out)
    return out


def summarize_matrix(energies: np.ndarray) -> np.ndarray:
    """Feature rows ``(mean, var, median, uq, lq)`` for each row of ``energies``."""
    e = np.asarray(energies, dtype=float)
    if e.ndim != 2:
        raise ValueError("expected a (slots, n) matrix")
    if e.shape[1] < 2:
        raise ValueError(f"need at least 2 energy values per slot, got {e.shape[1]}")
    mean = e.mean(axis=1)
    var = ((e - mean[:, None]) ** 2).mean(axis=1)
    lq, med, uq = quantile(e, [0.25, 0.5, 0.75]).T
    return np.column_stack([mean, var, med, uq, lq])


def summarize_slot(report: SlotReport | Sequence[float]) -> FeatureVector:
    values = report.energies_db if isinstance(report, SlotReport) else report
    row = summarize_matrix(np.asarray(values, dtype=float)[None, :])[0]
    return FeatureVector(*map(float, row))


class Dataset:
    """Ordered labelled feature rows; immutable once built.

    ``X`` holds the five features in ``FEATURE_NAMES`` order.
    """

    feature_dim = FEATURE_DIM

    def __init__(self, slot_ids, X, labels):
        slot_ids = np.array(slot_ids, dtype=np.int64).reshape(-1)
        X = np.array(X, dtype=float).reshape(-1, FEATURE_DIM)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        if not (len(slot_ids) == len(X) == len(labels)):
            raise DatasetError("slot_ids, features and labels differ in length")
        bad = ~np.isin(labels, (PU_LABEL, ATTACK_LABEL))
        if bad.any():
            raise DatasetError(f"label {labels[bad][0]} is not +1 or -1")
        if not np.all(np.isfinite(X)):
            raise DatasetError("non-finite feature value")
        for a in (slot_ids, X, labels):
            a.setflags(write=False)
        self.slot_ids, self.X, self.labels = slot_ids, X, labels

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            np.array_equal(self.slot_ids, other.slot_ids)
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self):
        n_pu = int(np.sum(self.labels == PU_LABEL))
        return f"Dataset({len(self)} rows, {n_pu} PU, {len(self) - n_pu} attack)"

    def examples(self) -> list[Example]:
        return [Example(FeatureVector(*map(float, x)), int(y)) for x, y in zip(self.X, self.labels)]

    def concat(self, other: Dataset) -> Dataset:
        return Dataset(
            np.concatenate([self.slot_ids, other.slot_ids]),
            np.vstack([self.X, other.X]),
            np.concatenate([self.labels, other.labels]),
        )

    def subset(self, idx) -> Dataset:
        return Dataset(self.slot_ids[idx], self.X[idx], self.labels[idx])

    def require_nonempty(self) -> Dataset:
        if len(self) == 0:
            raise DatasetError("data set is empty")
        return self


def dataset_from_energies(energies: np.ndarray, label: int, first_slot: int = 0) -> Dataset:
    energies = np.asarray(energies, dtype=float)
    if len(energies) == 0:
        raise DatasetError("no slot reports")
    slots = np.arange(first_slot, first_slot + len(energies))
    return Dataset(slots, summarize_matrix(energies), np.full(len(energies), label))


def build_dataset(reports: Iterable[SlotReport], label: int) -> Dataset:
    reports = list(reports)
    if not reports:
        raise DatasetError("no slot reports")
    if label not in (PU_LABEL, ATTACK_LABEL):
        raise DatasetError(f"label must be +1 or -1, got {label}")
    sizes = {len(r.energies_db) for r in reports}
    if len(sizes) != 1:
        raise DatasetError(f"reports disagree on the number of SUs: {sorted(sizes)}")
    energies = np.vstack([r.energies_db for r in reports])
    slots = [r.slot_id for r in reports]
    return Dataset(slots, summarize_matrix(energies), np.full(len(reports), label))


def _fmt(v: float) -> str:
    return format(v, ".17g")


def write_csv(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for sid, x, y in zip(ds.slot_ids, ds.X, ds.labels):
            w.writerow([int(sid), *(_fmt(float(v)) for v in x), int(y)])


def read_csv(path) -> Dataset:
    """Load a data set; malformed rows raise ``DatasetError`` naming the line."""
    path = Path(path)
    slot_ids, rows, labels = [], [], []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise DatasetError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(CSV_HEADER)} columns, got {len(row)}"
                )
            try:
                sid = int(row[0])
                feats = [float(v) for v in row[1:-1]]
                label = int(row[-1])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in feats):
                raise DatasetError(f"{path}:{lineno}: non-finite feature value")
            if label not in (PU_LABEL, ATTACK_LABEL):
                raise DatasetError(f"{path}:{lineno}: label must be 1 or -1, got {row[-1]}")
            slot_ids.append(sid)
            rows.append(feats)
            labels.append(label)
    return Dataset(slot_ids, np.array(rows).reshape(-1, FEATURE_DIM), labels)
