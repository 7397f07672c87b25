"""Pure-numpy kernel for streaming privatised-indicator aggregation.

Processes records in fixed-size chunks so peak memory is bounded by a constant
number of chunk buffers regardless of the record count.  Counting is done by
comparing the raw uniforms against the precomputed thresholds of
:func:`ldphist.mechanism.le_zero_thresholds`; noise sums (for the mean-noise
estimator) materialise the Laplace draws with the canonical inverse CDF.
"""

from __future__ import annotations

import numpy as np

from .mechanism import laplace_inverse_cdf, le_zero_thresholds

_CHUNK_ELEMS = 1 << 20


def privatized_cell_stats(
    cell_pos: np.ndarray,
    n_cells: int,
    sigma: float,
    rng: np.random.Generator,
    repeats: int = 1,
    want_sums: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Aggregate ``repeats`` privatisation passes over the records ``cell_pos``.

    ``cell_pos[i]`` is the active-cell position of record ``i`` (-1 when the
    point lies outside every active cell).  Consumes exactly one uniform per
    (pass, record, cell) in row-major order from ``rng`` and returns
    ``(counts of W <= 0, sums of W or None)``.
    """
    cell_pos = np.ascontiguousarray(cell_pos, dtype=np.int64)
    n = len(cell_pos)
    t0, t1 = le_zero_thresholds(sigma)
    counts = np.zeros(n_cells, dtype=np.int64)
    sums = np.zeros(n_cells, dtype=np.float64) if want_sums else None
    if n_cells == 0 or n == 0:
        return counts, sums
    chunk = max(1, _CHUNK_ELEMS // n_cells)
    for _ in range(repeats):
        for start in range(0, n, chunk):
            pos = cell_pos[start : start + chunk]
            m = len(pos)
            u = rng.random((m, n_cells))
            rows = np.nonzero(pos >= 0)[0]
            mask = u <= t0
            mask[rows, pos[rows]] = u[rows, pos[rows]] <= t1
            counts += mask.sum(axis=0)
            if want_sums:
                w = sigma * laplace_inverse_cdf(u)
                w[rows, pos[rows]] += 1.0
                sums += w.sum(axis=0)
    return counts, sums
