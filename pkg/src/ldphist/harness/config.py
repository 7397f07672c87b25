"""Experiment configuration: flat ``key = value`` files and model construction.

The config format is plain UTF-8 text, one ``key = value`` assignment per
line; blank lines and ``#`` comments are ignored and unknown keys are errors.
Lists are comma separated.  Structured values use ``name=value`` items inside
the list, e.g.::

    d = 1
    alpha = 1.0
    density = tent
    schedule = c_h=1.0,a=0.25,c_r=1.25,b=0.0
    n_grid = 256,2048,16384,131072
    replications = 30
    master_seed = 1
    estimators = private,nonprivate
    quad = tol=1e-8
    output_path = results

When the schedule omits ``c_r``, the radius is fixed (``b = 0``) to cover the
density's support box with one cell of margin at the coarsest bandwidth in
``n_grid``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ..densities import DensityModel, HypothesisTheta, builtin_models, f0_build, ftheta_build
from ..errors import ConfigurationError
from ..metrics import QuadratureSpec
from ..partition import ScheduleSpec

ESTIMATOR_NAMES = ("private", "nonprivate", "mean_noise")

_CONFIG_KEYS = (
    "d",
    "alpha",
    "density",
    "schedule",
    "n_grid",
    "replications",
    "master_seed",
    "estimators",
    "quad",
    "output_path",
)


@dataclass(frozen=True)
class DensitySpec:
    """Name plus parameters of a density model, as written in a config file."""

    name: str
    params: tuple[tuple[str, float], ...] = ()

    def as_dict(self) -> dict:
        return dict(self.params)

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v!r}" for k, v in self.params)
        return f"{self.name},{inner}"


def build_model(spec: DensitySpec, d: int) -> DensityModel:
    """Instantiate the density named by a :class:`DensitySpec` in dimension ``d``."""
    params = spec.as_dict()
    if spec.name in ("uniform", "tent", "pyramid"):
        return builtin_models(spec.name, d=d, **params)
    if spec.name == "f0":
        return f0_build(params.pop("L", 8.0), d)
    if spec.name == "ftheta":
        L = params.pop("L", 8.0)
        k = int(params.pop("k", 1))
        sign = int(params.pop("sign", 1))
        if params:
            raise ConfigurationError(f"unknown ftheta parameters: {sorted(params)}")
        return ftheta_build(HypothesisTheta.constant(d, k, L, sign))
    raise ConfigurationError(f"unknown density {spec.name!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a rate study needs; immutable and picklable for worker processes."""

    d: int
    alpha: float
    density: DensitySpec
    schedule: ScheduleSpec
    n_grid: tuple[int, ...]
    replications: int
    master_seed: int
    estimators: tuple[str, ...] = ("private", "nonprivate")
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    output_path: str = "results"

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ConfigurationError("d must be >= 1")
        if not (self.alpha > 0):
            raise ConfigurationError("alpha must be positive")
        if len(self.n_grid) < 1 or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigurationError("n_grid must be non-empty and strictly increasing")
        if self.replications < 1:
            raise ConfigurationError("replications must be >= 1")
        bad = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if bad or not self.estimators:
            raise ConfigurationError(
                f"estimators must be a non-empty subset of {ESTIMATOR_NAMES}, got {self.estimators}"
            )

    def experiment_id(self) -> str:
        canon = ";".join(
            [
                f"d={self.d}",
                f"alpha={self.alpha!r}",
                f"density={self.density.label()}",
                f"schedule={self.schedule.c_h!r},{self.schedule.a!r},{self.schedule.c_r!r},{self.schedule.b!r}",
                f"n_grid={','.join(str(n) for n in self.n_grid)}",
                f"replications={self.replications}",
                f"master_seed={self.master_seed}",
                f"estimators={','.join(self.estimators)}",
                f"quad={self.quad.subdivisions},{self.quad.tol!r},{self.quad.max_subdivisions}",
            ]
        )
        digest = hashlib.sha256(canon.encode()).hexdigest()[:10]
        return f"{self.density.name}-d{self.d}-{digest}"


def _parse_kv_items(value: str, context: str) -> dict[str, str]:
    out = {}
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigurationError(f"expected name=value items in {context}, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parse_density(value: str) -> DensitySpec:
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if not parts:
        raise ConfigurationError("density must name a model")
    name, rest = parts[0], parts[1:]
    params = []
    for item in rest:
        if "=" not in item:
            raise ConfigurationError(f"density parameters must be name=value, got {item!r}")
        k, v = item.split("=", 1)
        params.append((k.strip(), float(v)))
    return DensitySpec(name, tuple(params))


def _parse_schedule(value: str, density: DensitySpec, d: int, n_grid) -> ScheduleSpec:
    items = _parse_kv_items(value, "schedule")
    unknown = set(items) - {"c_h", "a", "c_r", "b"}
    if unknown:
        raise ConfigurationError(f"unknown schedule fields: {sorted(unknown)}")
    try:
        c_h = float(items["c_h"])
        a = float(items["a"])
    except KeyError as exc:
        raise ConfigurationError(f"schedule requires {exc.args[0]}") from None
    b = float(items.get("b", 0.0))
    if "c_r" in items:
        c_r = float(items["c_r"])
    else:
        if b != 0.0:
            raise ConfigurationError("c_r may only be omitted in the fixed-radius regime (b = 0)")
        model = build_model(density, d)
        reach = float(np.linalg.norm(np.abs(model.support).max(axis=0)))
        c_r = reach + c_h * float(min(n_grid)) ** (-a)
    return ScheduleSpec(c_h=c_h, a=a, c_r=c_r, b=b)


def _parse_quad(value: str) -> QuadratureSpec:
    items = _parse_kv_items(value, "quad")
    unknown = set(items) - {"subdivisions", "tol", "max_subdivisions"}
    if unknown:
        raise ConfigurationError(f"unknown quad fields: {sorted(unknown)}")
    return QuadratureSpec(
        subdivisions=int(items.get("subdivisions", 0)),
        tol=float(items.get("tol", 1e-8)),
        max_subdivisions=int(items.get("max_subdivisions", 0)),
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse the flat ``key = value`` experiment description."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value.strip()

    missing = [k for k in ("d", "alpha", "density", "schedule", "n_grid", "replications", "master_seed") if k not in raw]
    if missing:
        raise ConfigurationError(f"missing required keys: {missing}")

    d = int(raw["d"])
    density = _parse_density(raw["density"])
    n_grid = tuple(int(v) for v in raw["n_grid"].split(",") if v.strip())
    estimators = tuple(
        e.strip() for e in raw.get("estimators", "private,nonprivate").split(",") if e.strip()
    )
    return ExperimentConfig(
        d=d,
        alpha=float(raw["alpha"]),
        density=density,
        schedule=_parse_schedule(raw["schedule"], density, d, n_grid),
        n_grid=n_grid,
        replications=int(raw["replications"]),
        master_seed=int(raw["master_seed"]),
        estimators=estimators,
        quad=_parse_quad(raw["quad"]) if "quad" in raw else QuadratureSpec(),
        output_path=raw.get("output_path", "results"),
    )


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
