"""Versioned text format for fitted detectors.

Layout::

    puea-model 1
    kind = mcd
    threshold = 3.1415926535897931
    <scalar fields as ``name = value``>
    array <name> <dtype> <dim0> [<dim1>]
    <one line per row, space separated>
    end

Floats are written with 17 significant digits, so a save/load round trip is
exact.  ``None`` is written as ``none``.
"""
from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .base import DetectorKind, FittedDetector
from .iforest import IsolationForestModel
from .lof import LofModel
from .mcd import McdModel
from .ocsvm import OcsvmModel

FORMAT_VERSION = 1
MAGIC = "puea-model"

MODEL_CLASSES = {
    DetectorKind.ISOLATION_FOREST: IsolationForestModel,
    DetectorKind.OCSVM: OcsvmModel,
    DetectorKind.MCD: McdModel,
    DetectorKind.LOF: LofModel,
}


class ModelFormatError(ValueError):
    pass


def _fmt_scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _parse_scalar(text: str):
    if text == "none":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        return float(text)


def dumps(det: FittedDetector) -> str:
    lines = [f"{MAGIC} {FORMAT_VERSION}", f"kind = {det.kind.value}"]
    arrays = []
    for f in dataclasses.fields(det):
        if f.name == "kind":
            continue
        v = getattr(det, f.name)
        if isinstance(v, np.ndarray):
            arrays.append((f.name, v))
        else:
            lines.append(f"{f.name} = {_fmt_scalar(v)}")
    for name, a in arrays:
        kind = "int64" if np.issubdtype(a.dtype, np.integer) else "float64"
        lines.append(f"array {name} {kind} {' '.join(map(str, a.shape))}")
        rows = a.reshape(len(a), -1) if a.ndim == 2 else a.reshape(1, -1)
        for row in rows:
            lines.append(" ".join(_fmt_scalar(x) for x in row.tolist()))
    lines.append("end")
    return "\n".join(lines) + "\n"


def loads(text: str) -> FittedDetector:
    lines = text.splitlines()
    if not lines or lines[0].split()[:1] != [MAGIC]:
        raise ModelFormatError("not a puea model file")
    try:
        version = int(lines[0].split()[1])
    except (IndexError, ValueError):
        raise ModelFormatError("missing format version") from None
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    values = {}
    kind = None
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line == "end":
            continue
        if line.startswith("array "):
            parts = line.split()
            name, dtype, shape = parts[1], parts[2], tuple(int(s) for s in parts[3:])
            nrows = shape[0] if len(shape) == 2 else 1
            chunk = " ".join(lines[i:i + nrows])
            i += nrows
            flat = np.array(chunk.split(), dtype=float) if chunk.strip() else np.empty(0)
            if flat.size != int(np.prod(shape)):
                raise ModelFormatError(f"array {name}: expected {np.prod(shape)} values, got {flat.size}")
            values[name] = flat.reshape(shape).astype(np.int64 if dtype == "int64" else np.float64)
            continue
        if "=" not in line:
            raise ModelFormatError(f"line {i}: expected 'name = value'")
        key, _, val = (s.strip() for s in line.partition("="))
        if key == "kind":
            kind = DetectorKind.parse(val)
        else:
            values[key] = _parse_scalar(val)
    if kind is None:
        raise ModelFormatError("model file has no kind")
    cls = MODEL_CLASSES[kind]
    names = {f.name for f in dataclasses.fields(cls)} - {"kind"}
    missing = names - values.keys()
    if missing:
        raise ModelFormatError(f"{kind.value} model is missing {sorted(missing)}")
    if values.get("threshold") is not None:
        values["threshold"] = float(values["threshold"])
    return cls(**{k: values[k] for k in names})


def save_model(det: FittedDetector, path) -> None:
    Path(path).write_text(dumps(det), encoding="utf-8")


def load_model(path) -> FittedDetector:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    return loads(path.read_text(encoding="utf-8"))
