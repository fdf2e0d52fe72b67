"""Picks the compiled kernels when importable, else the NumPy fallback.

Set ``UCTS_PURE_PYTHON=1`` to force the fallback.
"""
import contextlib
import importlib
import os

from . import _kernels_py


def load(name=None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("ucts._kernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available():
    names = ["python"]
    try:
        load("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


if os.environ.get("UCTS_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
else:
    try:
        kernels = load("cython")
    except ImportError:
        kernels = _kernels_py

BACKEND = kernels.NAME

_CONSUMERS = ("ucts.splitting", "ucts.tree", "ucts.baselines")


@contextlib.contextmanager
def use_backend(name):
    """Temporarily route every kernel call through backend ``name``."""
    chosen = load(name)
    mods = [importlib.import_module(m) for m in _CONSUMERS]
    saved = [m.kernels for m in mods]
    for m in mods:
        m.kernels = chosen
    try:
        yield chosen
    finally:
        for m, k in zip(mods, saved):
            m.kernels = k
