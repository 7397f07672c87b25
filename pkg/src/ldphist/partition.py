"""Origin-anchored cubic partition of R^d and the active cells meeting a centred ball.

Cells are half-open cubes ``[k_1*h, (k_1+1)*h) x ... x [k_d*h, (k_d+1)*h)``
indexed by integer coordinate vectors ``k``.  The active set collects every
cell whose *closure* lies within distance ``r`` of the origin (a measure-zero
superset of the cells meeting the open ball, cheap to test and harmless
downstream), ordered lexicographically.

All values are immutable after construction and all operations are pure, so
they can be shared freely between concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CellBudgetError

DEFAULT_CELL_BUDGET = 10_000_000

#: Absolute tolerance on the bandwidth exponent when checking rate-optimality.
RATE_EXPONENT_TOL = 1e-12

CellId = tuple[int, ...]


@dataclass(frozen=True)
class PartitionSpec:
    """Cubic partition of R^d with bandwidth ``h``, paired with a ball radius ``r``."""

    d: int
    h: float
    r: float

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {self.d}")
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"bandwidth h must be finite and positive, got {self.h}")
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"ball radius r must be finite and positive, got {self.r}")

    def cell_volume(self) -> float:
        """Volume of a single cell, ``h**d``."""
        return self.h**self.d


def locate(spec: PartitionSpec, x) -> CellId:
    """Cell index of a point: ``k_i = floor(x_i / h)`` per axis.

    The division is done in double precision; inputs sitting exactly on a cell
    boundary that is not representable (e.g. ``x=0.9, h=0.3``) may land in the
    neighbouring cell compared with exact rational arithmetic.  Stochastic
    callers avoid boundary-valued inputs, so this never matters in practice.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.d,):
        raise ValueError(f"expected a point of shape ({spec.d},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point coordinates must be finite")
    return tuple(int(k) for k in np.floor(x / spec.h).astype(np.int64))


def locate_many(spec: PartitionSpec, points: np.ndarray) -> np.ndarray:
    """Vectorised :func:`locate` for an ``(n, d)`` array; returns ``(n, d)`` int64."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != spec.d:
        raise ValueError(f"expected points of shape (n, {spec.d}), got {points.shape}")
    if not np.all(np.isfinite(points)):
        raise ValueError("point coordinates must be finite")
    return np.floor(points / spec.h).astype(np.int64)


@dataclass(frozen=True)
class ActiveCells:
    """The ordered active-cell list of a partition plus an index lookup.

    ``coords`` has shape ``(N, d)`` and is sorted lexicographically; position
    ``j`` in the list is the cell's index wherever per-cell vectors (noisy
    indicators, counts, histogram values) appear in this package.
    """

    spec: PartitionSpec
    coords: np.ndarray

    def __post_init__(self) -> None:
        coords = np.ascontiguousarray(self.coords, dtype=np.int64)
        object.__setattr__(self, "coords", coords)
        if coords.ndim != 2 or coords.shape[1] != self.spec.d:
            raise ValueError("coords must have shape (N, d)")
        # Mixed-radix encoding of the coordinates; lexicographic order on
        # coords is ascending order on keys, so position lookup is a
        # searchsorted over a sorted array.
        if coords.shape[0] == 0:
            raise ValueError("active cell set is empty")
        lo = coords.min(axis=0)
        extent = coords.max(axis=0) - lo + 1
        strides = np.ones(self.spec.d, dtype=np.int64)
        for i in range(self.spec.d - 2, -1, -1):
            strides[i] = strides[i + 1] * extent[i + 1]
        keys = (coords - lo) @ strides
        if not np.all(np.diff(keys) > 0):
            raise ValueError("coords must be lexicographically sorted and distinct")
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_extent", extent)
        object.__setattr__(self, "_strides", strides)
        object.__setattr__(self, "_keys", keys)

    @property
    def count(self) -> int:
        return int(self.coords.shape[0])

    def __len__(self) -> int:
        return self.count

    def position(self, cell: CellId) -> int:
        """Position of ``cell`` in the list, or -1 if it is not active."""
        c = np.asarray(cell, dtype=np.int64)
        return int(self.positions_of_coords(c[None, :])[0])

    def positions_of_coords(self, coords: np.ndarray) -> np.ndarray:
        """Positions for an ``(n, d)`` int array of cell coordinates (-1 if absent)."""
        coords = np.asarray(coords, dtype=np.int64)
        rel = coords - self._lo
        in_range = np.all((rel >= 0) & (rel < self._extent), axis=1)
        keys = np.where(in_range[:, None], rel, 0) @ self._strides
        idx = np.searchsorted(self._keys, keys)
        idx[idx >= self.count] = self.count - 1
        hit = in_range & (self._keys[idx] == keys)
        return np.where(hit, idx, -1).astype(np.int64)

    def positions_of(self, points: np.ndarray) -> np.ndarray:
        """Positions of the cells containing each of ``(n, d)`` points (-1 if inactive)."""
        return self.positions_of_coords(locate_many(self.spec, points))


def active_cells(spec: PartitionSpec, budget: int = DEFAULT_CELL_BUDGET) -> ActiveCells:
    """Enumerate all cells whose closed cube touches the closed ball of radius ``r``.

    Raises :class:`CellBudgetError` before materialising anything if the
    candidate bounding box already exceeds ``budget`` cells.
    """
    h, r, d = spec.h, spec.r, spec.d
    # Cell k has closure [k*h, (k+1)*h]; it can only touch the ball when
    # k*h <= r and (k+1)*h >= -r.
    k_hi = math.floor(r / h)
    k_lo = math.ceil(-r / h) - 1
    per_axis = k_hi - k_lo + 1
    if per_axis**d > budget:
        raise CellBudgetError(per_axis**d, budget)
    ks = np.arange(k_lo, k_hi + 1, dtype=np.int64)
    lo_edge = ks * h
    hi_edge = (ks + 1) * h
    # Per-axis distance from 0 to the closed interval [k*h, (k+1)*h].
    offset = np.where(
        (lo_edge <= 0) & (hi_edge >= 0),
        0.0,
        np.minimum(np.abs(lo_edge), np.abs(hi_edge)),
    )
    grids = np.meshgrid(*([offset] * d), indexing="ij")
    dist_sq = np.zeros_like(grids[0])
    for g in grids:
        dist_sq += g * g
    mask = dist_sq <= r * r
    coord_grids = np.meshgrid(*([ks] * d), indexing="ij")
    coords = np.stack([g[mask] for g in coord_grids], axis=1)
    return ActiveCells(spec, coords)


@dataclass(frozen=True)
class ScheduleSpec:
    """Polynomial schedules ``h_n = c_h * n**(-a)`` and ``r_n = c_r * n**b``."""

    c_h: float
    a: float
    c_r: float = 1.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.c_h) and self.c_h > 0):
            raise ValueError(f"c_h must be finite and positive, got {self.c_h}")
        if not (math.isfinite(self.c_r) and self.c_r > 0):
            raise ValueError(f"c_r must be finite and positive, got {self.c_r}")
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("exponents a and b must be finite")

    def bandwidth(self, n: int) -> float:
        return self.c_h * float(n) ** (-self.a)

    def radius(self, n: int) -> float:
        return self.c_r * float(n) ** self.b


SCHEDULE_MODES = ("upc", "suc", "rate")


@dataclass(frozen=True)
class ScheduleReport:
    """Outcome of :func:`validate_schedule`: pass/fail plus the violated conditions."""

    mode: str
    d: int
    passed: bool
    violations: tuple[str, ...]
    flags: tuple[str, ...]
    margins: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "d": self.d,
            "passed": self.passed,
            "violations": list(self.violations),
            "flags": list(self.flags),
            "margins": dict(self.margins),
        }


def validate_schedule(d: int, schedule: ScheduleSpec, mode: str) -> ScheduleReport:
    """Check a polynomial schedule against the consistency / rate conditions.

    Modes:

    * ``"upc"`` -- universal pointwise consistency of the privatised
      histogram: ``a > 0``, ``b >= 0`` and ``1 - 2*d*a > 0``.
    * ``"suc"`` -- strong universal (L1) consistency: the ``"upc"``
      conditions plus ``1 - d*(a + b) > 0``.
    * ``"rate"`` -- bandwidth exponent is rate-optimal over Lipschitz
      densities: ``a == 1/(2*d + 2)`` within ``RATE_EXPONENT_TOL``.

    The checks are purely polynomial: logarithmic factors in the underlying
    conditions are invisible to exponent arithmetic, so strict inequalities on
    the exponents are used and flagged as such.  ``b == 0`` is accepted and
    flagged as the fixed-radius regime used when the support is known a
    priori; the growing-ball regime is ``b > 0``.
    """
    mode = mode.lower()
    if mode not in SCHEDULE_MODES:
        raise ValueError(f"mode must be one of {SCHEDULE_MODES}, got {mode!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be an integer >= 1, got {d}")
    a, b = schedule.a, schedule.b

    violations: list[str] = []
    flags: list[str] = []
    pointwise_margin = 1.0 - 2.0 * d * a
    mass_margin = 1.0 - d * (a + b)
    rate_gap = a - 1.0 / (2.0 * d + 2.0)
    margins = {
        "pointwise_exponent": pointwise_margin,
        "mass_exponent": mass_margin,
        "rate_gap": rate_gap,
    }

    if mode in ("upc", "suc"):
        if not a > 0:
            violations.append("bandwidth-shrink: requires exponent a > 0")
        if not b >= 0:
            violations.append("ball-growth: requires exponent b >= 0")
        if not pointwise_margin > 0:
            violations.append("pointwise-concentration: requires 1 - 2*d*a > 0")
        if b == 0:
            flags.append(
                "fixed-ball-radius: b == 0 assumes the density support lies inside the ball"
            )
        flags.append("log-factors-ignored: exponent checks are polynomial only")
    if mode == "suc":
        if not mass_margin > 0:
            violations.append("active-cell-mass: requires 1 - d*(a + b) > 0")
    if mode == "rate":
        if abs(rate_gap) > RATE_EXPONENT_TOL:
            violations.append("rate-exponent: requires a == 1/(2*d + 2)")

    return ScheduleReport(
        mode=mode,
        d=int(d),
        passed=not violations,
        violations=tuple(violations),
        flags=tuple(flags),
        margins=margins,
    )
