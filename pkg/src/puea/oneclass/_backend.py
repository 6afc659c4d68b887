"""Kernel backend selection: compiled extension when importable, numpy otherwise.

Set ``PUEA_PURE_PYTHON=1`` to force the numpy fallback.
"""
from __future__ import annotations

import contextlib
import importlib
import os

from . import _pykernels

_compiled = None
if not os.environ.get("PUEA_PURE_PYTHON"):
    try:
        _compiled = importlib.import_module("puea.oneclass._kernels")
    except ImportError:
        _compiled = None

kernels = _compiled if _compiled is not None else _pykernels
BACKEND = "cython" if _compiled is not None else "python"


def available() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


def get(name: str | None = None):
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


@contextlib.contextmanager
def use(name: str):
    """Temporarily route every detector through the named backend."""
    global kernels, BACKEND
    saved = kernels, BACKEND
    kernels, BACKEND = get(name), name
    try:
        yield kernels
    finally:
        kernels, BACKEND = saved
