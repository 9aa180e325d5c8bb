"""Backend switch for the compiled kernels.

Hot loops are written once in plain Python/NumPy and compiled with
``numba.njit`` when numba is importable. Setting ``NRPREDICT_DISABLE_NUMBA=1``
(or calling ``set_backend("numpy")``) routes every kernel to its NumPy
fallback instead; both paths produce bit-identical results.
"""
from __future__ import annotations

import os

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAS_NUMBA = False

_FALSY = {"", "0", "false", "no", "off"}
_use_numba = HAS_NUMBA and os.environ.get("NRPREDICT_DISABLE_NUMBA", "").strip().lower() in _FALSY


def jit(fn, nogil: bool = True):
    """Compile ``fn`` with numba if available; otherwise return it unchanged."""
    if not HAS_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=nogil)(fn)


def use_numba() -> bool:
    return _use_numba


def backend() -> str:
    return "numba" if _use_numba else "numpy"


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend name."""
    global _use_numba
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    prev = backend()
    _use_numba = name == "numba"
    return prev
