"""Histogram estimators: private (thresholded noisy indicators), empirical, mean-noise.

The private route aggregates the events ``W_j <= 0`` into per-cell fractions
``G_j``, inverts the conditional-mean identity into cell-mass estimates
``mu_j = (1/2 - G_j) / (1/2 - H(-1/sigma_w))`` (bounded but possibly
negative), and divides by the cell volume.  Estimates are piecewise constant
on the active cells and zero outside.

Aggregation is a sum of commutative integer counts, so record shards may be
merged in any order with bitwise-identical results; histograms are immutable
and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .mechanism import SQRT2, PrivacyParams, PrivatizedRecord
from .partition import ActiveCells, PartitionSpec


def laplace_cdf(z) -> np.ndarray:
    """Distribution function of the unit-variance Laplace law."""
    z = np.asarray(z, dtype=np.float64)
    return np.where(z <= 0, 0.5 * np.exp(SQRT2 * z), 1.0 - 0.5 * np.exp(-SQRT2 * z))


@dataclass(frozen=True)
class CellCounts:
    """Per-cell counts of records with ``W_j <= 0`` (ties count as <= 0)."""

    n: int
    le_zero: np.ndarray

    def __post_init__(self) -> None:
        le = np.ascontiguousarray(self.le_zero, dtype=np.int64)
        object.__setattr__(self, "le_zero", le)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if le.ndim != 1 or np.any(le < 0) or np.any(le > self.n):
            raise ValueError("le_zero entries must lie in [0, n]")

    @property
    def g(self) -> np.ndarray:
        """Empirical fractions ``G_j = le_zero[j] / n`` in [0, 1]."""
        return self.le_zero / self.n

    def __add__(self, other: "CellCounts") -> "CellCounts":
        if len(self.le_zero) != len(other.le_zero):
            raise ValueError("cannot merge counts of different lengths")
        return CellCounts(self.n + other.n, self.le_zero + other.le_zero)


def aggregate(records: Iterable[PrivatizedRecord]) -> CellCounts:
    """Count ``W_j <= 0`` per cell over a stream of records."""
    counts = None
    n = 0
    for rec in records:
        w = rec.w
        if counts is None:
            counts = np.zeros(len(w), dtype=np.int64)
        elif len(w) != len(counts):
            raise ValueError(f"record length {len(w)} != expected {len(counts)}")
        counts += w <= 0.0
        n += 1
    if counts is None:
        raise ValueError("at least one record is required")
    return CellCounts(n, counts)


def mu_tilde(counts: CellCounts, params: PrivacyParams) -> np.ndarray:
    """Cell-mass estimates ``(1/2 - G_j) / (1/2 - H(-1/sigma_w))``.

    Bounded by ``(1/2) / (1/2 - H(-1/sigma_w))`` in absolute value but not
    necessarily non-negative.
    """
    denom = 0.5 - float(laplace_cdf(-1.0 / params.sigma_w))
    return (0.5 - counts.g) / denom


class _GridHistogram:
    """Piecewise-constant function on the active cells, zero elsewhere."""

    spec: PartitionSpec
    cells: ActiveCells
    values: np.ndarray

    def value_at(self, x) -> float:
        """Value of the containing active cell (half-open membership), else 0."""
        pos = self.cells.positions_of(np.asarray(x, dtype=np.float64)[None, :])[0]
        return float(self.values[pos]) if pos >= 0 else 0.0

    def values_at(self, points: np.ndarray) -> np.ndarray:
        pos = self.cells.positions_of(points)
        out = np.zeros(len(pos))
        hit = pos >= 0
        out[hit] = self.values[pos[hit]]
        return out

    def total_mass(self) -> float:
        """Integral over the active cells: ``sum_j values[j] * h**d``."""
        return float(self.values.sum() * self.spec.cell_volume())


def _check_grid(spec: PartitionSpec, cells: ActiveCells, values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    if cells.spec != spec:
        raise ValueError("cells were built for a different partition spec")
    if values.shape != (cells.count,):
        raise ValueError(f"values must have shape ({cells.count},), got {values.shape}")
    return values


@dataclass(frozen=True)
class PrivateHistogram(_GridHistogram):
    """Estimate built from privatised records; values may be negative."""

    spec: PartitionSpec
    cells: ActiveCells
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", _check_grid(self.spec, self.cells, self.values))


@dataclass(frozen=True)
class EmpiricalHistogram(_GridHistogram):
    """Classical histogram from raw points; tracks the data mass outside the active set."""

    spec: PartitionSpec
    cells: ActiveCells
    values: np.ndarray
    outside_mass: float

    def __post_init__(self) -> None:
        values = _check_grid(self.spec, self.cells, self.values)
        if np.any(values < 0):
            raise ValueError("empirical histogram values must be non-negative")
        object.__setattr__(self, "values", values)


def private_histogram(
    counts: CellCounts, params: PrivacyParams, spec: PartitionSpec, cells: ActiveCells
) -> PrivateHistogram:
    """Density estimate ``mu_tilde / h**d`` on the active cells."""
    if len(counts.le_zero) != cells.count:
        raise ValueError("counts length does not match the active cell set")
    values = mu_tilde(counts, params) / spec.cell_volume()
    return PrivateHistogram(spec, cells, values)


def empirical_histogram(points: np.ndarray, spec: PartitionSpec, cells: ActiveCells) -> EmpiricalHistogram:
    """Classical histogram ``mu_n(A_j) / h**d`` over the active cells."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = len(points)
    if n < 1:
        raise ValueError("at least one data point is required")
    pos = cells.positions_of(points)
    hit = pos >= 0
    counts = np.bincount(pos[hit], minlength=cells.count).astype(np.int64)
    values = counts / (n * spec.cell_volume())
    outside = float((~hit).sum() / n)
    return EmpiricalHistogram(spec, cells, values, outside)


def mean_noise_estimator(records: Iterable[PrivatizedRecord]) -> np.ndarray:
    """Per-cell sample mean of the raw releases ``W`` (experimental alternative).

    Unbiased for the cell masses but analysed nowhere in this package; kept
    for empirical comparison against the thresholded estimator.
    """
    total = None
    n = 0
    for rec in records:
        if total is None:
            total = np.zeros(len(rec.w))
        elif len(rec.w) != len(total):
            raise ValueError("record length mismatch")
        total += rec.w
        n += 1
    if total is None:
        raise ValueError("at least one record is required")
    return total / n


def mean_noise_histogram(
    mean_w: np.ndarray, spec: PartitionSpec, cells: ActiveCells
) -> PrivateHistogram:
    """Piecewise-constant estimate ``mean(W_j) / h**d`` from the mean-noise route."""
    return PrivateHistogram(spec, cells, np.asarray(mean_w, dtype=np.float64) / spec.cell_volume())
