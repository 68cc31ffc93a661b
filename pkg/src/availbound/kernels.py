"""Backend selection for the simulation kernels.

The compiled extension is used for Pareto models when it imports; set
``AVAIL_BOUND_PURE=1`` (or call :func:`set_backend`) to force the Python
kernels.  Models with tabulated laws always run in Python.  Both backends
consume the same streams and return identical numbers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

COMPILED_AVAILABLE = _ckernels is not None
BACKEND = "cython" if COMPILED_AVAILABLE and os.environ.get("AVAIL_BOUND_PURE", "") in ("", "0") else "python"
BLOCK_SIZE = 2048


def set_backend(name: str) -> str:
    """Select ``"cython"`` or ``"python"``; returns the previous backend."""
    global BACKEND
    if name not in ("cython", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "cython" and not COMPILED_AVAILABLE:
        raise ImportError("the compiled kernels are not built")
    previous, BACKEND = BACKEND, name
    return previous


def _compiled(model) -> bool:
    return BACKEND == "cython" and model.is_pareto


def default_threads() -> int:
    return max(1, int(os.environ.get("AVAIL_BOUND_THREADS", "1") or 1))


def run_blocks(fn: Callable[[int, int], tuple], n: int, threads: int | None = None,
               block: int = BLOCK_SIZE) -> list:
    """Apply ``fn(start, count)`` to consecutive blocks of ``range(n)``, in order."""
    threads = threads or default_threads()
    spans = [(s, min(block, n - s)) for s in range(0, n, block)]
    if threads == 1 or len(spans) <= 1:
        return [fn(s, c) for s, c in spans]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda sc: fn(*sc), spans))


def concat(parts: list) -> tuple:
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def availability_block(model, bitgens, regime0, elapsed0, equilibrium, grid):
    grid = np.ascontiguousarray(grid, dtype=float)
    if _compiled(model):
        return _ckernels.availability_block(
            model.K1, model.K2, model.limiting_availability(), list(bitgens),
            np.ascontiguousarray(regime0, dtype=np.int_), np.ascontiguousarray(elapsed0, dtype=float),
            bool(equilibrium), grid)
    return _pykernels.availability_block(model, bitgens, regime0, elapsed0, equilibrium, grid)


def coupling_block(model, bitgens, z1, z2, cap):
    m1, x1, m2, x2 = int(z1.regime), float(z1.elapsed), int(z2.regime), float(z2.elapsed)
    if _compiled(model):
        return _ckernels.coupling_block(model.K1, model.K2, list(bitgens), m1, x1, m2, x2, int(cap))
    return _pykernels.coupling_block(model, bitgens, m1, x1, m2, x2, cap)


def splice_block(model, x, y, bitgen, n):
    if _compiled(model):
        return _ckernels.splice_block(model.K1, float(x), float(y), bitgen, int(n))
    return _pykernels.splice_block(model, float(x), float(y), bitgen, int(n))
