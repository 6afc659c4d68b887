"""Four one-class detectors behind one interface.

Every detector scores so that higher means more anomalous, and classifies a
point as an outlier when its score is strictly above a threshold calibrated
on the training scores.
"""
from __future__ import annotations


from ._backend import BACKEND
from .base import (
    ConvergenceError,
    DegenerateDataError,
    DetectorKind,
    DetectorParams,
    FittedDetector,
    IForestParams,
    LofParams,
    McdParams,
    NotFittedError,
    OcsvmParams,
    Prediction,
    as_matrix,
    calibrate_threshold,
    predict,
)
from .iforest import IsolationForestModel, average_path_length, fit_isolation_forest
from .lof import LofModel, fit_lof
from .mcd import McdModel, c_step, fit_mcd
from .ocsvm import OcsvmModel, fit_ocsvm, rbf_kernel
from .serialize import ModelFormatError, dumps, load_model, loads, save_model


def fit_raw(kind: DetectorKind | str, X, params: DetectorParams | None = None) -> FittedDetector:
    """Fit the model state of one detector kind, without a threshold."""
    kind = DetectorKind.parse(kind)
    params = params or DetectorParams()
    if kind is DetectorKind.ISOLATION_FOREST:
        return fit_isolation_forest(X, params.iforest)
    if kind is DetectorKind.OCSVM:
        return fit_ocsvm(X, params.ocsvm)
    if kind is DetectorKind.MCD:
        return fit_mcd(X, params.mcd)
    return fit_lof(X, params.lof)


def fit_detector(kind: DetectorKind | str, X, params: DetectorParams | None = None) -> FittedDetector:
    """Fit and calibrate: the returned detector is ready for ``predict``."""
    params = params or DetectorParams()
    X = as_matrix(X)
    det = fit_raw(kind, X, params)
    return calibrate_threshold(det, det.training_scores(X), params.contamination)


def score(det: FittedDetector, x) -> float:
    return det.score(x)


__all__ = [
    "BACKEND",
    "ConvergenceError",
    "DegenerateDataError",
    "DetectorKind",
    "DetectorParams",
    "FittedDetector",
    "IForestParams",
    "IsolationForestModel",
    "LofModel",
    "LofParams",
    "McdModel",
    "McdParams",
    "ModelFormatError",
    "NotFittedError",
    "OcsvmModel",
    "OcsvmParams",
    "Prediction",
    "average_path_length",
    "c_step",
    "calibrate_threshold",
    "dumps",
    "fit_detector",
    "fit_isolation_forest",
    "fit_lof",
    "fit_mcd",
    "fit_ocsvm",
    "fit_raw",
    "load_model",
    "loads",
    "predict",
    "rbf_kernel",
    "save_model",
    "score",
]
