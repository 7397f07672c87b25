"""Laplace privatisation of cell-membership indicators.

Each data holder releases, for every active cell ``j``, the noisy indicator
``W_j = 1{x in A_j} + sigma_w * zeta_j`` with i.i.d. unit-variance Laplace
noise ``zeta_j``.  The channel satisfies the alpha-LDP ratio condition as soon
as ``sigma_w >= 2**1.5 / alpha`` (at most two indicators change between any
two inputs, each contributing ``sqrt(2)/sigma_w`` to the log ratio).

Reproducibility contract: noise is derived from ``rng.random()`` draws taken
in cell-list order, one uniform per (record, cell), transformed by the exact
inverse CDF.  Downstream aggregation only needs the events ``W_j <= 0``; these
are decided by comparing the raw uniforms against precomputed thresholds,
which provably reproduces the materialised comparison bit for bit (the map
``u -> W`` is monotone), so streamed, batched and compiled-kernel aggregation
all agree exactly.

Operations are pure given their generator.  Use one generator per worker;
never share one between concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .partition import ActiveCells, locate

SQRT2 = math.sqrt(2.0)

# rng.random() can return exactly 0.0 (probability 2**-53); clamping keeps the
# inverse CDF finite and is applied identically in every code path.
U_MIN = 2.0**-53


def sigma_for_alpha(alpha: float) -> float:
    """Smallest noise standard deviation certifying alpha-LDP: ``2**1.5 / alpha``."""
    if not (math.isfinite(alpha) and alpha > 0):
        raise ValueError(f"alpha must be finite and positive, got {alpha}")
    return 2.0**1.5 / alpha


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy level ``alpha`` and noise scale ``sigma_w >= 2**1.5/alpha``.

    Noise below the certifying scale is rejected outright; there is no
    noiseless mode.
    """

    alpha: float
    sigma_w: float

    def __post_init__(self) -> None:
        bound = sigma_for_alpha(self.alpha)
        if not (math.isfinite(self.sigma_w) and self.sigma_w >= bound):
            raise ValueError(
                f"sigma_w must be >= 2**1.5/alpha = {bound:.6g} to certify "
                f"alpha={self.alpha}-LDP, got {self.sigma_w}"
            )

    @classmethod
    def for_alpha(cls, alpha: float) -> "PrivacyParams":
        """Equality case: the smallest admissible noise for the given level."""
        return cls(alpha=alpha, sigma_w=sigma_for_alpha(alpha))


def laplace_inverse_cdf(u) -> np.ndarray:
    """Quantile function of the unit-variance Laplace law (density ``exp(-sqrt(2)|x|)/sqrt(2)``)."""
    u = np.maximum(np.asarray(u, dtype=np.float64), U_MIN)
    return np.where(u < 0.5, np.log(2.0 * u), -np.log(2.0 - 2.0 * u)) / SQRT2


def sample_unit_laplace(rng: np.random.Generator, size=None):
    """Unit-variance Laplace draws via the inverse CDF (one uniform each)."""
    return laplace_inverse_cdf(rng.random() if size is None else rng.random(size))


def _bits(u: float) -> int:
    return int(np.float64(u).view(np.int64))


def _from_bits(b: int) -> float:
    return float(np.int64(b).view(np.float64))


@lru_cache(maxsize=None)
def le_zero_thresholds(sigma: float) -> tuple[float, float]:
    """Largest uniforms whose materialised ``W`` lands at or below zero.

    Returns ``(t0, t1)`` so that for a cell with indicator ``i`` the event
    ``W = i + sigma*zeta(u) <= 0`` happens exactly when ``u <= t_i``:

    * ``t0 = 0.5``: ``sigma*zeta(u) <= 0`` iff ``u <= 0.5``, exact in floating
      point because ``log`` is sign-exact around 1 and scaling by ``sigma > 0``
      preserves sign.
    * ``t1``: the flip point of the monotone map ``u -> 1 + sigma*zeta(u)``,
      found by bisection over the int64 representations of ``u`` and verified
      on both sides.  ``-1.0`` when no uniform is small enough.
    """
    if not (sigma > 0):
        raise ValueError("sigma must be positive")

    def w_of(u: float) -> float:
        return float(1.0 + sigma * laplace_inverse_cdf(np.float64(u)))

    lo_u = U_MIN
    hi_u = _from_bits(_bits(0.5) - 1)
    if w_of(lo_u) > 0.0:
        return 0.5, -1.0
    if w_of(hi_u) <= 0.0:
        return 0.5, hi_u
    lo_b, hi_b = _bits(lo_u), _bits(hi_u)
    # Invariant: w(lo_b) <= 0 < w(hi_b).
    while hi_b - lo_b > 1:
        mid = (lo_b + hi_b) // 2
        if w_of(_from_bits(mid)) <= 0.0:
            lo_b = mid
        else:
            hi_b = mid
    t1 = _from_bits(lo_b)
    check = 1.0 + sigma * laplace_inverse_cdf(np.array([t1, _from_bits(hi_b)]))
    if not (check[0] <= 0.0 < check[1]):
        raise RuntimeError("threshold bisection failed; log implementation not monotone")
    return 0.5, t1


@dataclass(frozen=True)
class PrivatizedRecord:
    """One data holder's release: the noisy indicator vector over active cells."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError("w must be a vector")
        object.__setattr__(self, "w", w)

    def __len__(self) -> int:
        return len(self.w)


def privatize(
    x, cells: ActiveCells, params: PrivacyParams, rng: np.random.Generator
) -> PrivatizedRecord:
    """Release the noisy indicator vector for one raw point.

    A point outside every active cell still produces a record (all entries
    pure scaled noise); exactly one entry carries the +1 offset otherwise.
    """
    pos = cells.position(locate(cells.spec, x))
    u = rng.random(cells.count)
    w = params.sigma_w * laplace_inverse_cdf(u)
    if pos >= 0:
        w[pos] += 1.0
    return PrivatizedRecord(w)


class CountSink:
    """Accumulates per-cell counts of the events ``W_j <= 0``.

    Counts are commutative integers, so shard-wise sinks may be merged in any
    order.
    """

    def __init__(self, n_cells: int):
        self.counts = np.zeros(n_cells, dtype=np.int64)
        self.n_records = 0

    def observe(self, j: int, le_zero: bool) -> None:
        if le_zero:
            self.counts[j] += 1

    def observe_record(self, le_zero_mask: np.ndarray) -> None:
        self.counts += le_zero_mask
        self.n_records += 1


def privatize_stream(
    x, cells: ActiveCells, params: PrivacyParams, rng: np.random.Generator, sink
) -> None:
    """Privatise one record and feed ``W_j <= 0`` events straight to ``sink``.

    Consumes the identical uniform stream as :func:`privatize` and decides the
    events by threshold comparison, so streamed counts match the materialised
    route exactly while only O(N) scratch is alive per record.  Sinks may
    implement ``observe_record(mask)`` for bulk delivery; otherwise
    ``observe(j, le_zero)`` is called for every cell in list order.
    """
    pos = cells.position(locate(cells.spec, x))
    t0, t1 = le_zero_thresholds(params.sigma_w)
    u = rng.random(cells.count)
    mask = u <= t0
    if pos >= 0:
        mask[pos] = u[pos] <= t1
    bulk = getattr(sink, "observe_record", None)
    if bulk is not None:
        bulk(mask)
    else:
        for j in range(cells.count):
            sink.observe(j, bool(mask[j]))


def ldp_log_ratio(params: PrivacyParams, cells: ActiveCells, x, x_prime, z) -> float:
    """Log ratio of the release densities at ``z`` for raw inputs ``x`` vs ``x_prime``.

    Equals ``(sqrt(2)/sigma_w) * sum_j (|z_j - i'_j| - |z_j - i_j|)`` where
    ``i, i'`` are the indicator vectors; only the (at most two) cells whose
    indicator differs contribute, so the value never exceeds
    ``2*sqrt(2)/sigma_w``.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (cells.count,):
        raise ValueError(f"z must have length {cells.count}, got {z.shape}")
    pos = cells.position(locate(cells.spec, x))
    pos_prime = cells.position(locate(cells.spec, x_prime))
    if pos == pos_prime:
        return 0.0
    total = 0.0
    if pos >= 0:
        total += abs(z[pos]) - abs(z[pos] - 1.0)
    if pos_prime >= 0:
        total += abs(z[pos_prime] - 1.0) - abs(z[pos_prime])
    return SQRT2 / params.sigma_w * total
