"""Experiment orchestration: replications, rate studies, diagnostics, emission.

Every replication is a deterministic function of ``(master_seed, n,
replication index)``: the data stream and the noise stream are derived with
:func:`ldphist.harness.seeding.seed_derive` under separate role tags, so the
same configuration always reproduces the same rows no matter how many workers
run or in which order they finish.  Rows are sorted by (estimator, n,
replication) before emission and floats are written with ``repr``, so reruns
produce byte-identical CSV output apart from the wall-time column.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import backends
from ..estimator import (
    CellCounts,
    empirical_histogram,
    mean_noise_histogram,
    private_histogram,
)
from ..densities import sample
from ..mechanism import PrivacyParams
from ..metrics import l1_distance
from ..partition import PartitionSpec, active_cells, validate_schedule
from .config import ExperimentConfig, build_model
from .seeding import ROLE_DATA, ROLE_NOISE, ROLE_ROW, seed_derive

CSV_HEADER = (
    "experiment_id,d,alpha,n,h,r,estimator,replication,"
    "l1_error,total_mass,seed,wall_time_ms,converged"
)


@dataclass(frozen=True)
class ReplicationRow:
    """One (estimator, n, replication) outcome; maps 1:1 onto a CSV row."""

    experiment_id: str
    d: int
    alpha: float
    n: int
    h: float
    r: float
    estimator: str
    replication: int
    l1_error: float
    total_mass: float
    seed: int
    wall_time_ms: float
    converged: bool

    def csv_line(self) -> str:
        return ",".join(
            [
                self.experiment_id,
                str(self.d),
                repr(float(self.alpha)),
                str(self.n),
                repr(float(self.h)),
                repr(float(self.r)),
                self.estimator,
                str(self.replication),
                repr(float(self.l1_error)),
                repr(float(self.total_mass)),
                str(self.seed),
                f"{self.wall_time_ms:.3f}",
                str(self.converged),
            ]
        )


def run_replication(cfg: ExperimentConfig, n: int, replication: int) -> list[ReplicationRow]:
    """Execute one end-to-end replication for every requested estimator.

    Draws ``n`` points from the configured density, builds the partition for
    this ``n``, privatises with streaming aggregation, and measures each
    estimator's L1 error against the true density.  All requested estimators
    see the same data draw, and the private and mean-noise estimators share
    one release of the privatised records.
    """
    h = cfg.schedule.bandwidth(n)
    r = cfg.schedule.radius(n)
    spec = PartitionSpec(cfg.d, h, r)
    cells = active_cells(spec)
    model = build_model(cfg.density, cfg.d)

    data_rng = np.random.Generator(
        np.random.PCG64(seed_derive(cfg.master_seed, n, replication, ROLE_DATA))
    )
    points = sample(model, data_rng, n)
    row_seed = seed_derive(cfg.master_seed, n, replication, ROLE_ROW)
    experiment_id = cfg.experiment_id()

    rows: list[ReplicationRow] = []

    def emit(name: str, hist, started: float) -> None:
        res = l1_distance(model, hist, cfg.quad)
        rows.append(
            ReplicationRow(
                experiment_id=experiment_id,
                d=cfg.d,
                alpha=cfg.alpha,
                n=n,
                h=h,
                r=r,
                estimator=name,
                replication=replication,
                l1_error=res.value,
                total_mass=hist.total_mass(),
                seed=row_seed,
                wall_time_ms=(time.perf_counter() - started) * 1e3,
                converged=res.converged,
            )
        )

    private_like = [e for e in cfg.estimators if e in ("private", "mean_noise")]
    if private_like:
        started = time.perf_counter()
        params = PrivacyParams.for_alpha(cfg.alpha)
        positions = cells.positions_of(points)
        noise_rng = np.random.Generator(
            np.random.PCG64(seed_derive(cfg.master_seed, n, replication, ROLE_NOISE))
        )
        counts_vec, sums = backends.cell_stats(
            positions,
            cells.count,
            params.sigma_w,
            noise_rng,
            want_sums="mean_noise" in private_like,
        )
        shared = time.perf_counter() - started
        if "private" in private_like:
            started = time.perf_counter() - shared
            hist = private_histogram(CellCounts(n, counts_vec), params, spec, cells)
            emit("private", hist, started)
        if "mean_noise" in private_like:
            started = time.perf_counter() - shared
            emit("mean_noise", mean_noise_histogram(sums / n, spec, cells), started)
    if "nonprivate" in cfg.estimators:
        started = time.perf_counter()
        emit("nonprivate", empirical_histogram(points, spec, cells), started)

    rows.sort(key=lambda row: (row.estimator, row.n, row.replication))
    return rows


def fit_slope(points: list[tuple[float, float]]) -> tuple[float, float, float]:
    """Ordinary least squares through ``(x, y)`` points: (slope, intercept, RMS residual).

    Requires at least three points with finite coordinates and pairwise
    distinct abscissae.
    """
    if len(points) < 3:
        raise ValueError("need at least 3 points to fit a slope")
    x = np.asarray([p[0] for p in points], dtype=np.float64)
    y = np.asarray([p[1] for p in points], dtype=np.float64)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("slope fit requires finite coordinates")
    if len(np.unique(x)) != len(x):
        raise ValueError("slope fit requires pairwise distinct x values")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def _replication_task(args) -> list[ReplicationRow]:
    cfg, n, replication = args
    return run_replication(cfg, n, replication)


@dataclass
class RateStudyResult:
    experiment_id: str
    rows: list[ReplicationRow]
    summaries: dict
    warnings: list[dict]
    csv_path: str
    json_path: str


def _schedule_warnings(cfg: ExperimentConfig) -> list[dict]:
    warnings = []
    for mode in ("upc", "suc"):
        report = validate_schedule(cfg.d, cfg.schedule, mode)
        if not report.passed:
            warnings.append(report.to_dict())
    return warnings


def _summarise(cfg: ExperimentConfig, rows: list[ReplicationRow]) -> dict:
    summaries: dict = {}
    for estimator in cfg.estimators:
        per_n = []
        for n in cfg.n_grid:
            errs = np.array(
                [row.l1_error for row in rows if row.estimator == estimator and row.n == n]
            )
            stderr = float(errs.std(ddof=1) / math.sqrt(len(errs))) if len(errs) > 1 else 0.0
            per_n.append((n, float(errs.mean()), stderr))
        entry = {
            "n": [p[0] for p in per_n],
            "mean_l1": [p[1] for p in per_n],
            "stderr": [p[2] for p in per_n],
        }
        if len(cfg.n_grid) >= 3:
            slope, intercept, resid = fit_slope(
                [(math.log(n), math.log(mean)) for n, mean, _ in per_n]
            )
            entry.update({"slope": slope, "intercept": intercept, "residual_rms": resid})
        summaries[estimator] = entry
    return summaries


def rate_study(cfg: ExperimentConfig, workers: int = 1) -> RateStudyResult:
    """Run the full grid of replications, fit log-log slopes, and emit CSV + JSON.

    Replications are independent tasks executed by a process pool when
    ``workers > 1``; results are sorted before emission, so the output is
    identical for any worker count.
    """
    tasks = [(cfg, n, rep) for n in cfg.n_grid for rep in range(cfg.replications)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_replication_task, tasks))
    else:
        chunks = [_replication_task(t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda row: (row.estimator, row.n, row.replication))

    experiment_id = cfg.experiment_id()
    summaries = _summarise(cfg, rows)
    warnings = _schedule_warnings(cfg)

    os.makedirs(cfg.output_path, exist_ok=True)
    csv_path = os.path.join(cfg.output_path, f"{experiment_id}.csv")
    json_path = os.path.join(cfg.output_path, f"{experiment_id}.json")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.csv_line() + "\n")
    summary = {
        "experiment_id": experiment_id,
        "backend": backends.default_backend(),
        "d": cfg.d,
        "alpha": cfg.alpha,
        "density": cfg.density.label(),
        "estimators": summaries,
        "warnings": warnings,
    }
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RateStudyResult(experiment_id, rows, summaries, warnings, csv_path, json_path)


def empirical_bias_variance(cfg: ExperimentConfig, n: int, reps: int) -> tuple[float, float]:
    """Split the private estimator's L1 error into bias and stochastic parts.

    Runs ``reps`` replications at sample size ``n``, averages the estimates
    pointwise (they share one partition), and returns ``(b, s)`` where ``b``
    is the L1 distance from the truth to the average estimate and ``s`` the
    mean L1 distance of the individual estimates from their average.
    """
    if reps < 10:
        raise ValueError("need at least 10 replications for a stable split")
    h = cfg.schedule.bandwidth(n)
    r = cfg.schedule.radius(n)
    spec = PartitionSpec(cfg.d, h, r)
    cells = active_cells(spec)
    model = build_model(cfg.density, cfg.d)
    params = PrivacyParams.for_alpha(cfg.alpha)

    value_rows = np.empty((reps, cells.count))
    for rep in range(reps):
        data_rng = np.random.Generator(
            np.random.PCG64(seed_derive(cfg.master_seed, n, rep, ROLE_DATA))
        )
        points = sample(model, data_rng, n)
        noise_rng = np.random.Generator(
            np.random.PCG64(seed_derive(cfg.master_seed, n, rep, ROLE_NOISE))
        )
        counts_vec, _ = backends.cell_stats(
            cells.positions_of(points), cells.count, params.sigma_w, noise_rng
        )
        value_rows[rep] = private_histogram(CellCounts(n, counts_vec), params, spec, cells).values

    from ..estimator import PrivateHistogram

    mean_hist = PrivateHistogram(spec, cells, value_rows.mean(axis=0))
    bias = l1_distance(model, mean_hist, cfg.quad).value
    vol = spec.cell_volume()
    stochastic = float(
        np.abs(value_rows - value_rows.mean(axis=0)).sum(axis=1).mean() * vol
    )
    return bias, stochastic
