import math
from fractions import Fraction

import numpy as np
import pytest

from ldphist import CellBudgetError, PartitionSpec, ScheduleSpec, active_cells, locate, validate_schedule
from ldphist.partition import locate_many


def brute_force_active(d, h, r, span=6):
    """Independent oracle: scan a wide index box with the closed-cube distance test."""
    out = []
    for flat in np.ndindex(*([2 * span] * d)):
        k = tuple(i - span for i in flat)
        dist_sq = 0.0
        for ki in k:
            lo, hi = ki * h, (ki + 1) * h
            if lo <= 0 <= hi:
                continue
            dist_sq += min(abs(lo), abs(hi)) ** 2
        if dist_sq <= r * r:
            out.append(k)
    return sorted(out)


class TestLocate:
    def test_exact_floor_1d(self):
        assert locate(PartitionSpec(1, 0.25, 1.0), [0.75]) == (3,)

    def test_floor_each_axis(self):
        assert locate(PartitionSpec(2, 1.0, 1.0), [-0.5, 2.3]) == (-1, 2)

    def test_rational_boundary_case(self):
        # Exact rational arithmetic puts 0.9 at the left edge of cell 3 for
        # h = 0.3.  Double precision may disagree on such inputs in general;
        # here the float quotient rounds to 3.0 as well.
        oracle = math.floor(Fraction(9, 10) / Fraction(3, 10))
        assert oracle == 3
        assert locate(PartitionSpec(1, 0.3, 1.0), [0.9]) == (math.floor(0.9 / 0.3),) == (3,)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            locate(PartitionSpec(1, 0.5, 1.0), [np.nan])
        with pytest.raises(ValueError):
            locate_many(PartitionSpec(2, 0.5, 1.0), np.array([[0.1, np.inf]]))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError):
            locate(PartitionSpec(2, 0.5, 1.0), [0.1])


class TestCellVolume:
    @pytest.mark.parametrize("h,d,expected", [(0.5, 2, 0.25), (1.0, 7, 1.0), (0.1, 3, 0.001)])
    def test_examples(self, h, d, expected):
        assert PartitionSpec(d, h, 1.0).cell_volume() == pytest.approx(expected, abs=1e-15)


class TestActiveCells:
    def test_1d_unit_ball(self):
        cells = active_cells(PartitionSpec(1, 0.5, 1.0))
        assert cells.count == 6
        assert cells.coords.ravel().tolist() == [-3, -2, -1, 0, 1, 2]

    def test_1d_small_ball(self):
        cells = active_cells(PartitionSpec(1, 1.0, 0.4))
        assert cells.coords.ravel().tolist() == [-1, 0]

    def test_2d_unit_disc_matches_brute_force(self):
        cells = active_cells(PartitionSpec(2, 1.0, 1.0))
        oracle = brute_force_active(2, 1.0, 1.0)
        assert [tuple(c) for c in cells.coords] == oracle
        # The four corner squares of {-2..1}^2 sit at distance sqrt(2) > 1.
        assert cells.count == 12

    @pytest.mark.parametrize("d,h,r", [(1, 0.3, 1.7), (2, 0.4, 1.1), (3, 0.7, 1.2)])
    def test_matches_brute_force(self, d, h, r):
        cells = active_cells(PartitionSpec(d, h, r))
        assert [tuple(c) for c in cells.coords] == brute_force_active(d, h, r)

    def test_budget_error_reports_count(self):
        with pytest.raises(CellBudgetError) as err:
            active_cells(PartitionSpec(3, 1e-4, 1.0), budget=10_000)
        assert err.value.candidate_count > 10_000

    def test_lookup_bijection(self):
        cells = active_cells(PartitionSpec(2, 0.5, 1.3))
        positions = cells.positions_of_coords(cells.coords)
        assert positions.tolist() == list(range(cells.count))
        assert cells.position((999, 999)) == -1

    def test_monotone_in_radius(self):
        spec_small = PartitionSpec(2, 0.5, 0.8)
        for r_big in (1.0, 1.5, 2.5):
            small = {tuple(c) for c in active_cells(spec_small).coords}
            big = {tuple(c) for c in active_cells(PartitionSpec(2, 0.5, r_big)).coords}
            assert small <= big

    @pytest.mark.parametrize("d", [1, 2])
    def test_scaling_law(self, d):
        h = 0.5
        for ratio in (4, 8, 16, 32):
            cells = active_cells(PartitionSpec(d, h, ratio * h))
            scaled = cells.count / ratio**d
            assert 1.0 <= scaled <= 4.0**d


class TestPartitionProperty:
    def test_membership_and_uniqueness(self):
        rng = np.random.default_rng(1234)
        spec = PartitionSpec(2, 0.37, 1.4)
        pts = (rng.random((100_000, 2)) - 0.5) * (4 * spec.r)
        pts = pts[np.linalg.norm(pts, axis=1) <= 2 * spec.r]
        coords = locate_many(spec, pts)
        lo = coords * spec.h
        hi = (coords + 1) * spec.h
        inside = np.all((lo <= pts) & (pts < hi), axis=1)
        assert inside.all()
        # Exactly one cell contains each point: the neighbours never do.
        for shift in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            other = coords + np.array(shift)
            lo, hi = other * spec.h, (other + 1) * spec.h
            assert not np.any(np.all((lo <= pts) & (pts < hi), axis=1))


class TestScheduleValidation:
    def test_suc_pass(self):
        report = validate_schedule(1, ScheduleSpec(c_h=1.0, a=0.25, c_r=1.0, b=0.1), "suc")
        assert report.passed
        assert report.margins["pointwise_exponent"] == pytest.approx(0.5)
        assert report.margins["mass_exponent"] == pytest.approx(0.65)

    def test_upc_fail_names_condition(self):
        report = validate_schedule(1, ScheduleSpec(c_h=1.0, a=0.6), "upc")
        assert not report.passed
        assert any("pointwise-concentration" in v for v in report.violations)

    def test_rate_pass_matches_optimal_exponent(self):
        report = validate_schedule(2, ScheduleSpec(c_h=1.0, a=1.0 / 6.0), "rate")
        assert report.passed

    def test_rate_fail(self):
        assert not validate_schedule(2, ScheduleSpec(c_h=1.0, a=0.25), "rate").passed

    def test_fixed_radius_flagged_not_failed(self):
        report = validate_schedule(1, ScheduleSpec(c_h=1.0, a=0.25, b=0.0), "upc")
        assert report.passed
        assert any("fixed-ball-radius" in f for f in report.flags)

    def test_shrinking_ball_fails(self):
        report = validate_schedule(1, ScheduleSpec(c_h=1.0, a=0.25, b=-0.5), "upc")
        assert not report.passed
        assert any("ball-growth" in v for v in report.violations)

    def test_bad_mode_rejected(self):
        with pytest.raises(ValueError):
            validate_schedule(1, ScheduleSpec(c_h=1.0, a=0.25), "bogus")


class TestSpecValidation:
    @pytest.mark.parametrize("kwargs", [dict(d=0, h=1, r=1), dict(d=1, h=0, r=1), dict(d=1, h=1, r=-1)])
    def test_partition_spec_rejects(self, kwargs):
        with pytest.raises(ValueError):
            PartitionSpec(**kwargs)

    def test_schedule_spec_rejects(self):
        with pytest.raises(ValueError):
            ScheduleSpec(c_h=-1.0, a=0.25)
