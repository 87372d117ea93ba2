# -*- coding: utf-8 -*-
"""
势能面提取与确定性流测试
"""
import math

import numpy as np
import pytest

from app.core.errors import DegenerateExtremum, NoMinimum, PotentialError, PreconditionError, StateOverflow
from app.core.potential import (
    SADDLE,
    PolynomialPotential,
    analyze,
    basin_of,
    drift,
    flow,
    flow_path,
    relaxation_constant,
    relaxation_time,
)

from tests.conftest import DOUBLE_WELL


class TestPolynomialPotential:

    def test_trailing_zeros_are_trimmed(self):
        pot = PolynomialPotential((0.0, 0.0, -0.5, 0.0, 0.25, 0.0, 0.0))
        assert pot.degree == 4

    @pytest.mark.parametrize("coefficients", [
        (0.0, 1.0, 0.0, 1.0),             # degree 3
        (0.0, 0.0, 1.0, 0.0, 0.0, 1.0),   # degree 5
        (0.0, 0.0, 1.0),                  # degree 2
        (0.0, 0.0, 0.5, 0.0, -0.25),      # leading coefficient < 0
    ])
    def test_rejects_bad_shape(self, coefficients):
        with pytest.raises(PotentialError):
            PolynomialPotential(coefficients)

    def test_derivatives(self):
        pot = PolynomialPotential(DOUBLE_WELL)
        assert pot.value(2.0) == pytest.approx(2.0)
        assert pot.derivative(2.0) == pytest.approx(6.0)
        assert pot.second_derivative(2.0) == pytest.approx(11.0)
        assert drift(pot, 2.0) == pytest.approx(-6.0)


class TestAnalyze:

    def test_double_well(self, double_well):
        assert double_well.n == 2
        assert double_well.minima == pytest.approx((-1.0, 1.0), abs=1e-9)
        assert double_well.saddles == pytest.approx((0.0,), abs=1e-9)
        assert double_well.curvature_min == pytest.approx((2.0, 2.0), abs=1e-7)
        assert double_well.curvature_saddle == pytest.approx((-1.0,), abs=1e-7)
        assert double_well.delta_0 == pytest.approx(1.0, abs=1e-9)

    def test_three_well(self, three_well):
        assert three_well.n == 3
        assert three_well.minima == pytest.approx((-2.0, 0.5, 3.0), abs=1e-9)
        assert three_well.saddles == pytest.approx((-1.0, 2.0), abs=1e-9)
        assert all(c > 0 for c in three_well.curvature_min)
        assert all(c < 0 for c in three_well.curvature_saddle)
        assert three_well.delta_0 == pytest.approx(1.0, abs=1e-9)

    def test_single_well_has_infinite_delta_0(self):
        land = analyze(PolynomialPotential((0.0, 0.0, 1.0, 0.0, 1.0)))
        assert land.n == 1
        assert land.saddles == ()
        assert math.isinf(land.delta_0)

    def test_degenerate_extremum(self):
        with pytest.raises(DegenerateExtremum):
            analyze(PolynomialPotential((0.0, 0.0, 0.0, 0.0, 1.0)))

    def test_no_minimum_inside_search_radius(self):
        with pytest.raises(NoMinimum):
            analyze(PolynomialPotential(DOUBLE_WELL), search_radius=0.5)

    def test_nonpositive_search_radius(self):
        with pytest.raises(PreconditionError):
            analyze(PolynomialPotential(DOUBLE_WELL), search_radius=-1.0)


class TestLandscapeGeometry:

    def test_sentinel_saddles(self, double_well):
        assert double_well.saddle(0) is None
        assert double_well.saddle(2) is None
        assert double_well.saddle(1) == pytest.approx(0.0, abs=1e-9)
        assert double_well.well_interval(1)[0] == -math.inf

    def test_shrunk_and_sigma_intervals(self, double_well):
        lo, hi = double_well.shrunk_well(1, 0.1)
        assert lo == -math.inf
        assert hi == pytest.approx(-0.2, abs=1e-9)
        lo, hi = double_well.sigma_interval(2, 0.1)
        assert lo == pytest.approx(0.1, abs=1e-9)
        assert hi == math.inf

    def test_shrunk_well_of_and_ball_index(self, three_well):
        assert three_well.shrunk_well_of(0.5, 0.1) == 2
        assert three_well.shrunk_well_of(-1.05, 0.1) is None
        assert three_well.shrunk_well_of(10.0, 0.1) == 3
        assert three_well.ball_index(2.9, 0.25) == 3
        assert three_well.ball_index(1.0, 0.25) is None

    def test_basin_of(self, three_well):
        assert basin_of(three_well, -5.0) == 1
        assert basin_of(three_well, 1.0) == 2
        assert basin_of(three_well, 2.5) == 3
        assert basin_of(three_well, three_well.saddles[0]) == SADDLE


class TestFlow:

    def test_flow_relaxes_to_minimum(self, double_well):
        pot = double_well.potential
        assert flow(pot, 0.3, 20.0) == pytest.approx(1.0, abs=1e-6)
        assert flow(pot, -3.0, 20.0) == pytest.approx(-1.0, abs=1e-6)

    def test_flow_at_time_zero(self, double_well):
        assert flow(double_well.potential, 0.7, 0.0) == 0.7

    def test_flow_rejects_bad_arguments(self, double_well):
        with pytest.raises(PreconditionError):
            flow(double_well.potential, 0.5, 1.0, h=0.0)
        with pytest.raises(PreconditionError):
            flow(double_well.potential, 0.5, -1.0)

    def test_flow_overflow(self, double_well):
        with pytest.raises(StateOverflow):
            flow(double_well.potential, 50.0, 1.0, h=0.5)

    def test_flow_path_grid(self, double_well):
        path = flow_path(double_well.potential, 0.5, 1.0, h=0.1)
        assert len(path) == 11
        assert path[0] == 0.5
        assert np.all(np.diff(path) > 0)
        assert path[-1] == pytest.approx(flow(double_well.potential, 0.5, 1.0, h=0.1), abs=1e-12)

    @pytest.mark.parametrize("x,y", [(1.2, 1.8), (0.7, 0.9), (-1.6, -1.1), (-0.95, -0.65)])
    def test_flow_contracts_where_convex(self, double_well, x, y):
        # 两点位于极小值同侧且 U'' > 0 的区间内
        pot = double_well.potential
        gaps = [abs(flow(pot, x, t) - flow(pot, y, t)) for t in np.arange(0.0, 5.01, 0.25)]
        assert np.all(np.diff(gaps) <= 1e-12)
        assert gaps[-1] < 0.1 * gaps[0]

    def test_flow_separates_near_saddle(self, double_well):
        # U'' < 0 的鞍点附近间距先增大, 之后两点仍落入同一极小值
        pot = double_well.potential
        gaps = [abs(flow(pot, 0.05, t) - flow(pot, 0.1, t)) for t in (0.0, 0.5, 20.0)]
        assert gaps[1] > gaps[0]
        assert gaps[2] < 1e-6

    @pytest.mark.parametrize("landscape", ["double_well", "three_well"])
    def test_flow_stays_in_basin(self, landscape, request):
        land = request.getfixturevalue(landscape)
        pot = land.potential
        for x in np.linspace(-2.4, 3.3, 58):
            if any(abs(x - s) < 0.05 for s in land.saddles):
                continue
            basin = basin_of(land, x)
            for t in (0.5, 5.0):
                assert basin_of(land, flow(pot, x, t)) == basin


class TestRelaxation:

    def test_relaxation_time_scales_with_log_eps(self, double_well):
        c = relaxation_constant(double_well, 0.05)
        assert c > 0
        assert relaxation_time(double_well, 0.01, 0.05) == pytest.approx(c * abs(math.log(0.01)))

    def test_relaxation_rejects_bad_arguments(self, double_well):
        with pytest.raises(PreconditionError):
            relaxation_time(double_well, 1.0, 0.05)
        with pytest.raises(PreconditionError):
            relaxation_constant(double_well, 0.0)

    def test_relaxation_constant_matches_closed_form(self, double_well):
        # U' = x^3 - x: int dy/|U'| = |g(b) - g(a)|, g(x) = ln|1 - 1/x^2| / 2
        def g(x):
            return 0.5 * math.log(abs(1.0 - 1.0 / x ** 2))

        gamma, c, used, k = 0.05, 0.0, 0, 0
        while used < 40:
            k += 1
            eps = 2.0 ** -k
            a, b = eps ** gamma, eps ** (2 * gamma)
            if not a + 2.5 * b < 1.0:
                continue
            used += 1
            log_eps = abs(math.log(eps))
            c = max(c, -g(1.0 + b / 2) / log_eps, (g(a) - g(1.0 - b / 2)) / log_eps,
                    (g(a) - g(a + 2 * b)) / a)
        assert relaxation_constant(double_well, gamma) == pytest.approx(c, rel=1e-6)
        assert relaxation_time(double_well, 0.05, gamma) == pytest.approx(c * abs(math.log(0.05)), rel=1e-6)
