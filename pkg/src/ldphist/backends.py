"""Kernel backend selection: compiled extension when available, numpy fallback otherwise.

Both backends consume the identical uniform stream and apply identical
threshold decisions, so the returned cell counts are bit-for-bit equal no
matter which backend runs.  Noise sums may differ between backends in the last
ulp (libm vs numpy ``log``); within one backend they are deterministic.

Set ``LDPHIST_BACKEND=python`` or ``=cython`` to force a choice; the default
is the compiled kernel when the extension imported successfully.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels
from .mechanism import le_zero_thresholds

try:
    from . import _speedups as _ext
except ImportError:  # pragma: no cover - depends on the build environment
    _ext = None

_ENV_VAR = "LDPHIST_BACKEND"


def available_backends() -> tuple[str, ...]:
    return ("python", "cython") if _ext is not None else ("python",)


def default_backend() -> str:
    forced = os.environ.get(_ENV_VAR, "").strip().lower()
    if forced:
        if forced not in ("python", "cython"):
            raise ValueError(f"{_ENV_VAR} must be 'python' or 'cython', got {forced!r}")
        if forced == "cython" and _ext is None:
            raise RuntimeError("compiled kernel requested but the extension is not built")
        return forced
    return "cython" if _ext is not None else "python"


def cell_stats(
    cell_pos: np.ndarray,
    n_cells: int,
    sigma: float,
    rng: np.random.Generator,
    repeats: int = 1,
    want_sums: bool = False,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Counts of ``W <= 0`` (and optional sums of ``W``) per active cell.

    Runs ``repeats`` independent privatisation passes over the records whose
    active-cell positions are ``cell_pos`` (-1 marks a point outside every
    active cell), drawing one uniform per (pass, record, cell) from ``rng`` in
    row-major order.
    """
    backend = backend or default_backend()
    if backend == "python":
        return _kernels.privatized_cell_stats(
            cell_pos, n_cells, sigma, rng, repeats=repeats, want_sums=want_sums
        )
    if backend != "cython":
        raise ValueError(f"unknown backend {backend!r}")
    if _ext is None:
        raise RuntimeError("compiled kernel is not available; build the extension")
    cell_pos = np.ascontiguousarray(cell_pos, dtype=np.int64)
    counts = np.zeros(n_cells, dtype=np.int64)
    sums = np.zeros(n_cells, dtype=np.float64)
    _t0, t1 = le_zero_thresholds(sigma)
    _ext.privatized_cell_stats_raw(
        cell_pos,
        n_cells,
        float(sigma),
        t1,
        rng.bit_generator,
        int(repeats),
        bool(want_sums),
        counts,
        sums,
    )
    return counts, (sums if want_sums else None)
