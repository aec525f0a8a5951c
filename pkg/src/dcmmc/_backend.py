"""Kernel backend selection: compiled Cython kernel with numpy fallback."""

from __future__ import annotations

import os

from . import _plant_py

try:
    from . import _plant_cy
except ImportError:
    _plant_cy = None

_FORCED = os.environ.get("DCMMC_BACKEND", "").strip().lower() or None


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _plant_cy is not None else ("python",)


def get_backend(name: str | None = None):
    """Return the kernel module for `name` (None -> env override or fastest)."""
    name = name or _FORCED
    if name is None:
        return _plant_cy if _plant_cy is not None else _plant_py
    if name == "python":
        return _plant_py
    if name == "cython":
        if _plant_cy is None:
            raise ImportError(
                "the compiled kernel is not available; reinstall with a C "
                "compiler or use backend='python'")
        return _plant_cy
    raise ValueError(f"unknown backend {name!r} (use 'cython' or 'python')")


def active_backend_name() -> str:
    return get_backend().BACKEND_NAME
