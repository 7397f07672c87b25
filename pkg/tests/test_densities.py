import math

import numpy as np
import pytest

from ldphist import (
    ConfigurationError,
    DensityModel,
    HypothesisTheta,
    QuadratureSpec,
    builtin_models,
    f0_build,
    ftheta_build,
    g0_eval,
    g0_integral,
    g_eval,
    integrate_box,
    lipschitz_probe,
    sample,
    tau,
)
from ldphist.metrics import integrate_interval


def survival_integral(L, d, m=1 << 14):
    """Independent oracle for the pyramid integral: L * int_0^{1/2} (1-2t)^d dt."""
    res = integrate_interval(lambda t: L * (1.0 - 2.0 * t) ** d, 0.0, 0.5,
                             QuadratureSpec(subdivisions=m, tol=1e-12, max_subdivisions=m))
    return res.value


class TestG0:
    def test_centre_attains_half(self):
        assert g0_eval(1.0, [0.5, 0.5]) == pytest.approx(0.5)

    def test_boundary_vanishes(self):
        assert g0_eval(3.0, [0.0]) == 0.0

    def test_interior_min(self):
        assert g0_eval(1.0, [0.25, 0.4]) == pytest.approx(0.25)

    def test_outside_unit_box_rejected(self):
        with pytest.raises(ValueError):
            g0_eval(1.0, [1.2])

    @pytest.mark.parametrize(
        "L,d,expected", [(1.0, 1, 0.25), (1.0, 2, 1.0 / 6.0), (4.0, 3, 0.5)]
    )
    def test_integral_closed_form(self, L, d, expected):
        assert g0_integral(L, d) == pytest.approx(expected, abs=1e-15)
        assert g0_integral(L, d) == pytest.approx(survival_integral(L, d), abs=1e-9)

    @pytest.mark.parametrize("d", [1, 2])
    def test_integral_matches_tensor_quadrature(self, d):
        quad = QuadratureSpec(subdivisions=1024 if d == 1 else 512, tol=1e-9,
                              max_subdivisions=1 << 13)
        res = integrate_box(lambda x: g0_eval(1.0, x), [0.0] * d, [1.0] * d, quad)
        assert res.value == pytest.approx(g0_integral(1.0, d), abs=1e-6)


class TestTau:
    def test_first_ramp(self):
        assert float(tau(1, 0.125)) == pytest.approx(0.5)

    def test_second_ramp_onset(self):
        assert float(tau(2, 1.0 / 8.0)) == pytest.approx(0.0)

    def test_second_ramp(self):
        assert float(tau(1, 0.3)) == pytest.approx(0.2)

    def test_domain_checked(self):
        with pytest.raises(ValueError):
            tau(2, 0.3)


class TestG:
    def test_positive_half(self):
        assert float(g_eval(1.0, 1, [0.125])) == pytest.approx(0.125)

    def test_sign_flip_in_upper_half(self):
        assert float(g_eval(1.0, 1, [0.375])) == pytest.approx(-0.125)

    def test_amplitude_bound(self):
        rng = np.random.default_rng(5)
        for d, k, L in [(1, 1, 1.0), (2, 2, 8.0), (3, 3, 4.0)]:
            x = rng.random((2000, d)) / (2 * k)
            assert np.abs(g_eval(L, k, x)).max() <= L / (8 * k) + 1e-12

    @pytest.mark.parametrize("d,k", [(1, 1), (1, 4), (2, 2), (2, 3), (3, 2), (3, 4)])
    def test_integral_vanishes(self, d, k):
        # Positive and negative parts cancel exactly; an even node count per
        # axis pairs them up, so any resolution works.
        half = 1.0 / (2.0 * k)
        quad = QuadratureSpec(subdivisions=16, tol=1e-12, max_subdivisions=32)
        res = integrate_box(lambda x: g_eval(2.0, k, x), [0.0] * d, [half] * d, quad)
        assert abs(res.value) < 1e-9

    def test_sign_structure(self):
        rng = np.random.default_rng(7)
        d, k = 2, 2
        x = rng.random((10_000, d)) / (2 * k)
        vals = g_eval(1.0, k, x)
        upper = (x >= 1.0 / (4 * k)).sum(axis=1)
        nonzero = vals != 0
        assert np.all((vals[nonzero] > 0) == (upper[nonzero] % 2 == 0))


class TestF0:
    def test_normaliser_1d(self):
        model = f0_build(8.0, 1)
        assert model.pdf(np.array([0.5])) == pytest.approx(4.0 / 3.0)
        assert model.pdf(np.array([0.125])) == pytest.approx(2.0 / 3.0)

    def test_vanishes_outside(self):
        model = f0_build(8.0, 2)
        assert model.pdf(np.array([1.5, 0.5])) == 0.0
        assert model.pdf(np.array([-0.01, 0.5])) == 0.0

    def test_requires_large_L(self):
        with pytest.raises(ConfigurationError):
            f0_build(5.0, 1)  # needs L >= 16/3

    @pytest.mark.parametrize("d", [1, 2])
    def test_normalised(self, d):
        model = f0_build(10.0, d)
        quad = QuadratureSpec(tol=1e-6, max_subdivisions=1 << 13)
        res = integrate_box(model.pdf, model.support[0], model.support[1], quad,
                            axis_breaks=[[0.25, 0.75]] * d)
        assert res.value == pytest.approx(1.0, abs=1e-6)

    def test_lipschitz_certificate(self):
        model = f0_build(8.0, 2)
        rng = np.random.default_rng(11)
        assert lipschitz_probe(model, 4000, rng) <= model.lipschitz * (1 + 1e-9)


class TestFTheta:
    def test_plus_minus_differ_by_two_g(self):
        plus = ftheta_build(HypothesisTheta.constant(1, 1, 8.0, 1))
        minus = ftheta_build(HypothesisTheta.constant(1, 1, 8.0, -1))
        x = np.linspace(0.26, 0.74, 33)[:, None]
        gap = plus.pdf(x) - minus.pdf(x)
        local = x - 0.25
        assert gap == pytest.approx(2.0 * g_eval(8.0, 1, local), abs=1e-12)

    def test_max_deviation_is_amplitude(self):
        base = f0_build(8.0, 1)
        pert = ftheta_build(HypothesisTheta.constant(1, 1, 8.0, 1))
        x = np.linspace(0.25, 0.7499, 2001)[:, None]
        dev = np.abs(pert.pdf(x) - base.pdf(x))
        assert dev.max() <= 1.0 + 1e-12  # L/(8k) = 1
        # The bound is attained at the ramp peaks.
        peaks = np.array([[0.375], [0.625]])
        assert np.abs(pert.pdf(peaks) - base.pdf(peaks)) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("d,k", [(1, 1), (1, 2), (1, 3), (2, 1)])
    def test_normalised_random_theta(self, d, k):
        rng = np.random.default_rng(100 + 10 * d + k)
        hyp = HypothesisTheta.random(d, k, 8.0, rng)
        model = ftheta_build(hyp)
        breaks = list(hyp.bump_breakpoints()) + [0.0, 1.0]
        quad = QuadratureSpec(tol=1e-6, max_subdivisions=1 << 13)
        res = integrate_box(model.pdf, model.support[0], model.support[1], quad,
                            axis_breaks=[breaks] * d)
        assert res.value == pytest.approx(1.0, abs=1e-6)

    def test_agree_outside_flipped_cell(self):
        rng = np.random.default_rng(21)
        hyp = HypothesisTheta.random(2, 2, 8.0, rng)
        flipped = hyp.flip(3)
        a, b = ftheta_build(hyp), ftheta_build(flipped)
        pts = rng.random((5000, 2))
        origin = hyp.cell_origin(3)
        outside = ~np.all((pts >= origin) & (pts < origin + 0.25), axis=1)
        va, vb = a.pdf(pts[outside]), b.pdf(pts[outside])
        assert np.array_equal(va, vb)

    def test_amplitude_constraint_enforced(self):
        with pytest.raises(ConfigurationError):
            ftheta_build(HypothesisTheta.constant(1, 1, 12.0, 1))  # 12/8 > c_1 = 4/3

    def test_positivity(self):
        rng = np.random.default_rng(33)
        model = ftheta_build(HypothesisTheta.random(2, 3, 8.0, rng))
        pts = rng.random((20_000, 2))
        assert np.all(model.pdf(pts) >= 0)


class TestBuiltins:
    def test_uniform(self):
        model = builtin_models("uniform", d=1)
        assert model.pdf(np.array([0.3])) == pytest.approx(1.0)

    def test_tent(self):
        model = builtin_models("tent", d=1)
        assert model.pdf(np.array([0.5])) == pytest.approx(2.0)
        assert model.pdf(np.array([0.0])) == pytest.approx(0.0)

    def test_pyramid_2d_centre(self):
        model = builtin_models("pyramid", d=2)
        assert model.pdf(np.array([0.5, 0.5])) == pytest.approx(3.0)

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            builtin_models("gauss", d=1)

    @pytest.mark.parametrize("name", ["uniform", "tent", "pyramid"])
    @pytest.mark.parametrize("d", [1, 2])
    def test_normalised(self, name, d):
        model = builtin_models(name, d=d)
        quad = QuadratureSpec(tol=1e-7, max_subdivisions=1 << 12)
        res = integrate_box(model.pdf, model.support[0], model.support[1], quad)
        assert res.value == pytest.approx(1.0, abs=1e-6)


class TestSampling:
    def test_uniform_moments(self):
        rng = np.random.default_rng(123)
        draws = sample(builtin_models("uniform", d=1), rng, 1_000_000)
        assert draws.shape == (1_000_000, 1)
        assert draws.mean() == pytest.approx(0.5, abs=0.002)

    def test_tent_moments(self):
        rng = np.random.default_rng(124)
        draws = sample(builtin_models("tent", d=1), rng, 1_000_000)[:, 0]
        assert draws.mean() == pytest.approx(0.5, abs=0.002)
        assert draws.var() == pytest.approx(1.0 / 24.0, abs=0.002)

    def test_ftheta_rejection_matches_quadrature(self):
        rng = np.random.default_rng(125)
        model = ftheta_build(HypothesisTheta.constant(1, 1, 8.0, 1))
        n = 200_000
        draws = sample(model, rng, n)[:, 0]
        edges = np.linspace(0.0, 1.0, 17)
        counts, _ = np.histogram(draws, bins=edges)
        for i in range(16):
            res = integrate_box(model.pdf, [edges[i]], [edges[i + 1]],
                                QuadratureSpec(tol=1e-9, max_subdivisions=1 << 12))
            p = res.value
            se = math.sqrt(p * (1 - p) / n)
            assert counts[i] / n == pytest.approx(p, abs=4 * se + 1e-12)

    def test_single_point_shape(self):
        rng = np.random.default_rng(126)
        pt = sample(builtin_models("tent", d=2), rng)
        assert pt.shape == (2,)

    def test_low_acceptance_rejected(self):
        # A wildly loose envelope forces the acceptance guard to trip.
        base = builtin_models("uniform", d=1)
        bad = DensityModel("bad", base.pdf, base.support, 0.0, 1e6, sampler=None)
        with pytest.raises(ConfigurationError):
            sample(bad, np.random.default_rng(0), 100)


class TestLipschitzProbe:
    def test_uniform_interior_constant(self):
        rng = np.random.default_rng(42)
        assert lipschitz_probe(builtin_models("uniform", d=1), 2000, rng) == pytest.approx(0.0)

    def test_pyramid_within_certificate(self):
        rng = np.random.default_rng(43)
        model = builtin_models("pyramid", d=1)
        ratio = lipschitz_probe(model, 4000, rng)
        assert ratio <= model.lipschitz * (1 + 1e-9)
        assert ratio > 0.5 * model.lipschitz  # near pairs actually stress the slope

    def test_ftheta_within_L(self):
        rng = np.random.default_rng(44)
        model = ftheta_build(HypothesisTheta.random(2, 2, 8.0, rng))
        assert lipschitz_probe(model, 4000, rng) <= 8.0 * (1 + 1e-9)

    def test_rejects_zero_pairs(self):
        with pytest.raises(ValueError):
            lipschitz_probe(builtin_models("uniform", d=1), 0, np.random.default_rng(0))
