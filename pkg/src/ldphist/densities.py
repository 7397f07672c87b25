"""True-density models: built-in test densities and the sign-perturbed family.

A :class:`DensityModel` bundles a vectorised pdf, its support box, a certified
Euclidean Lipschitz constant (0 means "not certified"), a finite sup bound and
an optional exact sampler.  The perturbed family ``f_theta`` adds sign-flipped
bumps to a fixed baseline ``f0`` on a ``k x ... x k`` grid of sub-cells tiling
``[1/4, 3/4)^d``; neighbouring members differ on exactly one sub-cell.

Models are immutable; pdf evaluation is pure.  Samplers consume an externally
supplied :class:`numpy.random.Generator` -- use one generator per worker.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError

#: Proposal batches whose acceptance rate falls below this abort rejection sampling.
MIN_ACCEPTANCE_RATE = 1e-4
_PROBE_BATCH = 8192


@dataclass(frozen=True)
class DensityModel:
    """Evaluable, samplable density with known support and Lipschitz certificate.

    ``pdf`` accepts arrays of shape ``(..., d)`` and returns shape ``(...)``;
    it vanishes outside ``support`` (rows ``support[0]`` / ``support[1]`` are
    the lower / upper corners).  ``lipschitz == 0.0`` means no certificate.
    """

    name: str
    pdf: Callable[[np.ndarray], np.ndarray]
    support: np.ndarray
    lipschitz: float
    sup_bound: float
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def __post_init__(self) -> None:
        support = np.asarray(self.support, dtype=np.float64)
        if support.ndim != 2 or support.shape[0] != 2:
            raise ValueError("support must have shape (2, d)")
        if not np.all(support[1] > support[0]):
            raise ValueError("support box must have positive widths")
        object.__setattr__(self, "support", support)
        if not (math.isfinite(self.sup_bound) and self.sup_bound > 0):
            raise ValueError("sup_bound must be finite and positive")
        if self.lipschitz < 0:
            raise ValueError("lipschitz must be >= 0")

    @property
    def dim(self) -> int:
        return int(self.support.shape[1])


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        if d != 1:
            raise ValueError(f"expected points with {d} coordinates")
        x = x[None]
    if x.shape[-1] != d:
        raise ValueError(f"expected points of shape (..., {d}), got {x.shape}")
    return x


def _boundary_distance(x: np.ndarray) -> np.ndarray:
    # min_i min(x_i, 1 - x_i); the tent profile of the unit box.
    return np.minimum(x, 1.0 - x).min(axis=-1)


def g0_eval(L: float, x) -> np.ndarray:
    """Pyramid bump on the unit box: ``L * min_i min(x_i, 1 - x_i)``.

    Raises for points outside ``[0, 1]^d``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x[None]
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("g0 is only defined on the unit box")
    return L * _boundary_distance(x)


def g0_integral(L: float, d: int) -> float:
    """Closed form of the pyramid's integral over the unit box: ``L / (2*(d+1))``."""
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be an integer >= 1, got {d}")
    return L / (2.0 * (d + 1))


def tau(k: int, x) -> np.ndarray:
    """Two-ramp rescaling of ``[0, 1/(2k))`` onto ``[0, 1)``.

    ``4*k*x`` on the first half-interval, ``4*k*(x - 1/(4k))`` on the second.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0) or np.any(x >= 1.0 / (2.0 * k)):
        raise ValueError(f"tau domain is [0, 1/(2k)) with k={k}")
    return np.where(x < 1.0 / (4.0 * k), 4.0 * k * x, 4.0 * k * x - 1.0)


def g_eval(L: float, k: int, x) -> np.ndarray:
    """Sign-alternating bump on ``A = [0, 1/(2k))^d``; ``|g| <= L/(8k)``.

    The sign is ``(-1)**m`` where ``m`` counts coordinates in the upper half
    ``[1/(4k), 1/(2k))``; the magnitude is the pyramid composed with the
    per-axis ramps, scaled by ``1/(4k)``.  Its integral over ``A`` is zero.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x[None]
    half = 1.0 / (2.0 * k)
    if np.any(x < 0.0) or np.any(x >= half):
        raise ValueError(f"g domain is [0, 1/(2k))^d with k={k}")
    upper = x >= 1.0 / (4.0 * k)
    sign = np.where(upper.sum(axis=-1) % 2 == 0, 1.0, -1.0)
    t = np.where(upper, 4.0 * k * x - 1.0, 4.0 * k * x)
    return sign * g0_eval(L, t) / (4.0 * k)


def _f0_constant(d: int) -> float:
    # Normaliser of min(4*s(x), 1): its integral is 2*(1 - 2**-(d+1))/(d+1).
    return (d + 1) / (2.0 * (1.0 - 2.0 ** -(d + 1)))


def f0_build(L: float, d: int) -> DensityModel:
    """Baseline density: ``c_d * min(4*s(x), 1)`` on the unit box, constant on the centre block.

    ``s(x) = min_i min(x_i, 1 - x_i)``, so the density equals ``c_d`` on
    ``[1/4, 3/4]^d``, falls off linearly with slope ``4*c_d``, is positive on
    the open box and integrates to one.  Requires ``L >= 4*c_d`` so that the
    certified Lipschitz class contains it.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be an integer >= 1, got {d}")
    c_d = _f0_constant(d)
    if L < 4.0 * c_d:
        raise ConfigurationError(
            f"L not sufficiently large: baseline needs L >= 4*c_d = {4.0 * c_d:.6g}, got {L}"
        )

    def pdf(x):
        x = _as_points(x, d)
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=-1)
        s = _boundary_distance(np.clip(x, 0.0, 1.0))
        return np.where(inside, c_d * np.minimum(4.0 * s, 1.0), 0.0)

    return DensityModel(
        name=f"f0(d={d})",
        pdf=pdf,
        support=np.array([[0.0] * d, [1.0] * d]),
        lipschitz=4.0 * c_d,
        sup_bound=c_d,
    )


@dataclass(frozen=True)
class HypothesisTheta:
    """Sign pattern for the perturbed family: one +-1 entry per bump sub-cell.

    ``theta`` is flat in C order over the multi-index ``j`` in
    ``{0, ..., k-1}^d``; sub-cell ``j`` is ``y_j + [0, 1/(2k))^d`` with
    ``y_{j_i} = 1/4 + j_i/(2k)``, and the sub-cells tile ``[1/4, 3/4)^d``.
    """

    d: int
    k: int
    L: float
    theta: np.ndarray

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {self.d}")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"k must be an integer >= 1, got {self.k}")
        theta = np.ascontiguousarray(self.theta, dtype=np.int64)
        object.__setattr__(self, "theta", theta)
        if theta.shape != (self.k**self.d,):
            raise ValueError(f"theta must have length k**d = {self.k ** self.d}")
        if not np.all(np.abs(theta) == 1):
            raise ValueError("theta entries must be +-1")

    @classmethod
    def constant(cls, d: int, k: int, L: float, sign: int = 1) -> "HypothesisTheta":
        if sign not in (1, -1):
            raise ValueError("sign must be +-1")
        return cls(d, k, L, np.full(k**d, sign, dtype=np.int64))

    @classmethod
    def random(cls, d: int, k: int, L: float, rng: np.random.Generator) -> "HypothesisTheta":
        return cls(d, k, L, rng.choice([-1, 1], size=k**d))

    def flip(self, flat_index: int) -> "HypothesisTheta":
        """Neighbour with the sign at one bump sub-cell reversed."""
        theta = self.theta.copy()
        theta[flat_index] = -theta[flat_index]
        return HypothesisTheta(self.d, self.k, self.L, theta)

    def cell_origin(self, flat_index: int) -> np.ndarray:
        """Lower corner ``y_j`` of bump sub-cell ``flat_index``."""
        j = np.asarray(np.unravel_index(flat_index, (self.k,) * self.d), dtype=np.float64)
        return 0.25 + j / (2.0 * self.k)

    def bump_breakpoints(self) -> np.ndarray:
        """All axis positions where the perturbed pdf can kink: 1/4 + j/(4k)."""
        return 0.25 + np.arange(2 * self.k + 1) / (4.0 * self.k)


def ftheta_build(hyp: HypothesisTheta) -> DensityModel:
    """Perturbed density: baseline plus ``theta_j``-signed bumps on the centre block.

    Feasibility requires the baseline (``L >= 4*c_d``) and non-negativity of
    the perturbed pdf (``L/(8k) <= c_d``); both violations are configuration
    errors rather than silent clamps.
    """
    d, k, L = hyp.d, hyp.k, hyp.L
    base = f0_build(L, d)
    c_d = _f0_constant(d)
    amplitude = L / (8.0 * k)
    if amplitude > c_d:
        raise ConfigurationError(
            f"perturbation amplitude L/(8k) = {amplitude:.6g} exceeds the block height "
            f"c_d = {c_d:.6g}; increase k or decrease L"
        )
    theta = hyp.theta
    base_pdf = base.pdf

    def pdf(x):
        x = _as_points(x, d)
        vals = np.asarray(base_pdf(x), dtype=np.float64)
        in_block = np.all((x >= 0.25) & (x < 0.75), axis=-1)
        # Bump sub-cell of each point and its local coordinate within it.
        j = np.clip(np.floor((x - 0.25) * (2.0 * k)).astype(np.int64), 0, k - 1)
        local = x - (0.25 + j / (2.0 * k))
        upper = local >= 1.0 / (4.0 * k)
        sign = np.where(upper.sum(axis=-1) % 2 == 0, 1.0, -1.0)
        t = np.where(upper, 4.0 * k * local - 1.0, 4.0 * k * local)
        t = np.clip(t, 0.0, 1.0)
        bump = sign * (L * _boundary_distance(t)) / (4.0 * k)
        flat = np.zeros(x.shape[:-1], dtype=np.int64)
        for axis in range(d):
            flat = flat * k + j[..., axis]
        return np.where(in_block, vals + theta[flat] * bump, vals)

    return DensityModel(
        name=f"ftheta(d={d},k={k})",
        pdf=pdf,
        support=np.array([[0.0] * d, [1.0] * d]),
        lipschitz=L,
        sup_bound=c_d + amplitude,
    )


def _uniform_model(d: int, lo=None, hi=None) -> DensityModel:
    lo = np.zeros(d) if lo is None else np.asarray(lo, dtype=np.float64)
    hi = np.ones(d) if hi is None else np.asarray(hi, dtype=np.float64)
    if lo.shape != (d,) or hi.shape != (d,) or not np.all(hi > lo):
        raise ConfigurationError("uniform box must satisfy hi > lo per axis")
    vol = float(np.prod(hi - lo))

    def pdf(x):
        x = _as_points(x, d)
        inside = np.all((x >= lo) & (x <= hi), axis=-1)
        return np.where(inside, 1.0 / vol, 0.0)

    def sampler(rng, size):
        return lo + (hi - lo) * rng.random((size, d))

    return DensityModel(
        name=f"uniform(d={d})",
        pdf=pdf,
        support=np.stack([lo, hi]),
        lipschitz=0.0,
        sup_bound=1.0 / vol,
        sampler=sampler,
    )


def _tent_model(d: int) -> DensityModel:
    # Product of triangular densities 4*min(x, 1-x) on [0, 1].
    lipschitz = 4.0 * 2.0 ** (d - 1) * math.sqrt(d)

    def pdf(x):
        x = _as_points(x, d)
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=-1)
        t = 4.0 * np.minimum(x, 1.0 - x)
        return np.where(inside, np.clip(t, 0.0, None).prod(axis=-1), 0.0)

    def sampler(rng, size):
        u = rng.random((size, d))
        return np.where(u < 0.5, np.sqrt(u / 2.0), 1.0 - np.sqrt((1.0 - u) / 2.0))

    return DensityModel(
        name=f"tent(d={d})",
        pdf=pdf,
        support=np.array([[0.0] * d, [1.0] * d]),
        lipschitz=lipschitz,
        sup_bound=2.0**d,
        sampler=sampler,
    )


def _pyramid_model(d: int) -> DensityModel:
    # Normalised pyramid g0 / integral(g0); the L factor cancels.
    scale = 2.0 * (d + 1)

    def pdf(x):
        x = _as_points(x, d)
        inside = np.all((x >= 0.0) & (x <= 1.0), axis=-1)
        s = _boundary_distance(np.clip(x, 0.0, 1.0))
        return np.where(inside, scale * s, 0.0)

    return DensityModel(
        name=f"pyramid(d={d})",
        pdf=pdf,
        support=np.array([[0.0] * d, [1.0] * d]),
        lipschitz=scale,
        sup_bound=scale / 2.0,
    )


def builtin_models(name: str, **params) -> DensityModel:
    """Named test densities: ``uniform``, ``tent`` (product-triangular), ``pyramid``."""
    d = int(params.pop("d", 1))
    if name == "uniform":
        model = _uniform_model(d, params.pop("lo", None), params.pop("hi", None))
    elif name == "tent":
        model = _tent_model(d)
    elif name == "pyramid":
        model = _pyramid_model(d)
    else:
        raise ConfigurationError(f"unknown builtin density {name!r}")
    if params:
        raise ConfigurationError(f"unknown parameters for {name!r}: {sorted(params)}")
    return model


def sample(model: DensityModel, rng: np.random.Generator, size: Optional[int] = None):
    """Draw points from the model: exact sampler if present, else rejection.

    Rejection proposes uniformly on the support box against the ``sup_bound``
    envelope; a probe batch with acceptance below ``MIN_ACCEPTANCE_RATE``
    raises :class:`ConfigurationError`.  Returns ``(size, d)`` or a single
    ``(d,)`` point when ``size`` is None.
    """
    n = 1 if size is None else int(size)
    if n < 0:
        raise ValueError("size must be >= 0")
    if model.sampler is not None:
        pts = model.sampler(rng, n)
    else:
        lo, hi = model.support
        d = model.dim
        out = np.empty((n, d))
        filled = 0
        proposed = 0
        accepted = 0
        while filled < n:
            batch = max(_PROBE_BATCH, min(4 * (n - filled), 1 << 18))
            cand = lo + (hi - lo) * rng.random((batch, d))
            keep = rng.random(batch) * model.sup_bound <= model.pdf(cand)
            proposed += batch
            accepted += int(keep.sum())
            if proposed >= _PROBE_BATCH and accepted < MIN_ACCEPTANCE_RATE * proposed:
                raise ConfigurationError(
                    f"rejection acceptance rate {accepted / proposed:.2e} below "
                    f"{MIN_ACCEPTANCE_RATE:.0e} for {model.name}"
                )
            take = min(int(keep.sum()), n - filled)
            out[filled : filled + take] = cand[keep][:take]
            filled += take
        pts = out
    return pts[0] if size is None else pts


def lipschitz_probe(model: DensityModel, pairs: int, rng: np.random.Generator) -> float:
    """Max observed ``|pdf(x) - pdf(y)| / ||x - y||`` over random in-support pairs.

    Half the pairs are independent uniforms on the support box, half are tight
    perturbations (which stress the certificate much harder).
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    lo, hi = model.support
    d = model.dim
    width = hi - lo
    n_far = pairs // 2
    n_near = pairs - n_far
    ratios = []
    if n_far:
        x = lo + width * rng.random((n_far, d))
        y = lo + width * rng.random((n_far, d))
        dist = np.linalg.norm(x - y, axis=1)
        ok = dist > 0
        if ok.any():
            ratios.append(np.abs(model.pdf(x[ok]) - model.pdf(y[ok])) / dist[ok])
    if n_near:
        x = lo + width * rng.random((n_near, d))
        delta = (rng.random((n_near, d)) - 0.5) * (2e-3 * width)
        y = np.clip(x + delta, lo, hi)
        dist = np.linalg.norm(x - y, axis=1)
        ok = dist > 0
        if ok.any():
            ratios.append(np.abs(model.pdf(x[ok]) - model.pdf(y[ok])) / dist[ok])
    if not ratios:
        return 0.0
    return float(np.concatenate(ratios).max())
