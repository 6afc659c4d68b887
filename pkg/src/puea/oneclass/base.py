"""Shared detector vocabulary: kinds, parameters, thresholds and predictions."""
from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field

import numpy as np

from ..features import quantile


class DetectorKind(str, enum.Enum):
    ISOLATION_FOREST = "iforest"
    OCSVM = "ocsvm"
    MCD = "mcd"
    LOF = "lof"

    @classmethod
    def parse(cls, text: str | DetectorKind) -> DetectorKind:
        if isinstance(text, DetectorKind):
            return text
        key = text.strip().lower().replace("-", "").replace("_", "")
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(
                f"unknown detector {text!r}; choose from {', '.join(k.value for k in cls)}"
            ) from None

    @property
    def label(self) -> str:
        return _LABELS[self]


_ALIASES = {
    "iforest": DetectorKind.ISOLATION_FOREST,
    "if": DetectorKind.ISOLATION_FOREST,
    "isolationforest": DetectorKind.ISOLATION_FOREST,
    "ocsvm": DetectorKind.OCSVM,
    "svm": DetectorKind.OCSVM,
    "oneclasssvm": DetectorKind.OCSVM,
    "mcd": DetectorKind.MCD,
    "lof": DetectorKind.LOF,
}
_LABELS = {
    DetectorKind.ISOLATION_FOREST: "IF",
    DetectorKind.OCSVM: "SVM",
    DetectorKind.MCD: "MCD",
    DetectorKind.LOF: "LOF",
}


class NotFittedError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (KKT residual {residual:.3g})")
        self.residual = residual


class DegenerateDataError(ValueError):
    pass


@dataclass(frozen=True)
class IForestParams:
    num_trees: int = 100
    subsample_size: int = 256
    seed: int = 0


@dataclass(frozen=True)
class OcsvmParams:
    nu: float = 0.05
    gamma: float | str = "scale"
    tolerance: float = 1e-4
    max_iter: int = 100_000
    cache_mb: float = 256.0


@dataclass(frozen=True)
class McdParams:
    support_fraction: float | None = None
    num_initial_subsets: int = 500
    seed: int = 0


@dataclass(frozen=True)
class LofParams:
    k_neighbors: int = 20


@dataclass(frozen=True)
class DetectorParams:
    contamination: float = 0.05
    iforest: IForestParams = field(default_factory=IForestParams)
    ocsvm: OcsvmParams = field(default_factory=OcsvmParams)
    mcd: McdParams = field(default_factory=McdParams)
    lof: LofParams = field(default_factory=LofParams)

    def __post_init__(self):
        if not 0 < self.contamination < 0.5:
            raise ValueError(f"contamination must lie in (0, 0.5), got {self.contamination}")
        if self.iforest.num_trees < 1 or self.iforest.subsample_size < 2:
            raise ValueError("isolation forest needs num_trees >= 1 and subsample_size >= 2")
        if not 0 < self.ocsvm.nu <= 1:
            raise ValueError(f"nu must lie in (0, 1], got {self.ocsvm.nu}")
        if self.ocsvm.tolerance <= 0 or self.ocsvm.max_iter < 1:
            raise ValueError("ocsvm tolerance and max_iter must be positive")
        g = self.ocsvm.gamma
        if not (g == "scale" or (isinstance(g, (int, float)) and g > 0)):
            raise ValueError(f"gamma must be 'scale' or a positive number, got {g!r}")
        sf = self.mcd.support_fraction
        if sf is not None and not 0 < sf <= 1:
            raise ValueError(f"support_fraction must lie in (0, 1], got {sf}")
        if self.mcd.num_initial_subsets < 1:
            raise ValueError("num_initial_subsets must be >= 1")
        if self.lof.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")

    def with_seed(self, seed: int) -> DetectorParams:
        return dataclasses.replace(
            self,
            iforest=dataclasses.replace(self.iforest, seed=seed),
            mcd=dataclasses.replace(self.mcd, seed=seed),
        )


@dataclass(frozen=True)
class Prediction:
    score: float
    is_outlier: bool


class FittedDetector:
    """Fitted model state plus an optional decision threshold.

    Subclasses are frozen dataclasses carrying ``kind`` and ``threshold`` and
    implementing ``score_many``.  Higher scores are more anomalous for every kind.
    """

    kind: DetectorKind
    threshold: float | None

    def score_many(self, X) -> np.ndarray:
        raise NotImplementedError

    def training_scores(self, X_train) -> np.ndarray:
        """Scores used for threshold calibration; by default the fitted rows themselves."""
        return self.score_many(X_train)

    def score(self, x) -> float:
        return float(self.score_many(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def with_threshold(self, threshold: float):
        return dataclasses.replace(self, threshold=float(threshold))

    def predict_many(self, X) -> np.ndarray:
        if self.threshold is None:
            raise NotFittedError(f"{self.kind.value} detector has no calibrated threshold")
        return self.score_many(X) > self.threshold


def as_matrix(X, dim: int | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"feature dimension mismatch: model has {dim}, input has {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite feature value")
    return X


def calibrate_threshold(det: FittedDetector, train_scores, contamination: float):
    """Return ``det`` with threshold at the ``1 - contamination`` training-score quantile."""
    scores = np.asarray(train_scores, dtype=float)
    if scores.size == 0:
        raise ValueError("no training scores to calibrate on")
    if not 0 < contamination < 0.5:
        raise ValueError(f"contamination must lie in (0, 0.5), got {contamination}")
    return det.with_threshold(quantile(scores, 1.0 - contamination))


def predict(det: FittedDetector, x) -> Prediction:
    if det.threshold is None:
        raise NotFittedError(f"{det.kind.value} detector has no calibrated threshold")
    s = det.score(x)
    return Prediction(s, s > det.threshold)
