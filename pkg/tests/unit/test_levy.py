# -*- coding: utf-8 -*-
"""
Lévy 噪声模型测试: 尾部、分解、big jump 抽样与 stable 增量
"""
import math

import numpy as np
import pytest
from scipy import stats

from app.core.errors import DomainError, PreconditionError
from app.core.levy import (
    InnerProfile,
    LevyModel,
    TailSpec,
    big_jump_rate,
    decompose,
    draw_big_jump,
    invert_conditional_tail,
    rv_ratio_check,
    rv_ratio_profile,
    sample_big_jump,
    sample_interjump_time,
    sample_small_increment,
    stable_increment,
    stable_parameters,
    standard_stable,
    tail_minus,
    tail_plus,
    tail_total,
)


class TestTailSpec:

    @pytest.mark.parametrize("kwargs", [
        {"r": 0.0, "c_plus": 1.0},
        {"r": 1.0, "c_plus": 0.0},
        {"r": 1.0, "c_plus": 1.0, "c_minus": -0.1},
        {"r": 1.0, "c_plus": 1.0, "sv_power": 2.5},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(PreconditionError):
            TailSpec(**kwargs)

    def test_kappa_and_power(self):
        tails = TailSpec(r=1.5, c_plus=2.0, c_minus=1.0)
        assert tails.kappa == 0.5
        assert tails.is_pure_power
        assert not TailSpec(r=1.5, c_plus=1.0, sv_power=-1.0).is_pure_power

    def test_stable_inner_needs_matching_alpha(self):
        with pytest.raises(PreconditionError):
            LevyModel(d=0.0, mu=0.0, tails=TailSpec(r=1.5, c_plus=1.0), inner=InnerProfile.stable(1.2))
        with pytest.raises(PreconditionError):
            LevyModel(d=0.0, mu=0.0, tails=TailSpec(r=1.5, c_plus=1.0, sv_power=1.0),
                      inner=InnerProfile.stable(1.5))
        with pytest.raises(PreconditionError):
            LevyModel(d=-1.0, mu=0.0, tails=None)


class TestTails:

    def test_symmetric_stable_tails(self, cauchy_model):
        assert tail_plus(cauchy_model, 2.0) == pytest.approx(0.5)
        assert tail_minus(cauchy_model, 2.0) == pytest.approx(0.5)
        assert tail_total(cauchy_model, 4.0) == pytest.approx(0.5)
        assert cauchy_model.side_densities == pytest.approx((1.0, 1.0))

    def test_vectorized(self, asymmetric_model):
        u = np.array([1.0, 4.0])
        np.testing.assert_allclose(tail_total(asymmetric_model, u), 1.5 * u ** -1.5)

    def test_tail_below_one(self, cauchy_model):
        with pytest.raises(DomainError):
            tail_plus(cauchy_model, 0.5)

    def test_brownian_has_no_tail(self):
        model = LevyModel.brownian()
        assert tail_total(model, 3.0) == 0.0
        assert model.kappa == 0.0


    @pytest.mark.parametrize("sv_power,tolerance", [(0.0, 0.01), (1.0, 0.1)])
    def test_kappa_along_decades(self, sv_power, tolerance):
        tails = TailSpec(r=1.5, c_plus=1.0, c_minus=0.5, sv_power=sv_power)
        model = LevyModel(d=0.0, mu=0.0, tails=tails, inner=InnerProfile.truncated())
        u = 10.0 ** np.arange(1, 9)
        ratio = tail_minus(model, u) / tail_plus(model, u)
        np.testing.assert_allclose(ratio, model.kappa, rtol=tolerance)

class TestDecompose:

    def test_symmetric_stable_moments(self, cauchy_model):
        eps, rho = 0.1, 0.7
        dec = decompose(cauchy_model, eps, rho)
        R = eps ** -rho
        assert dec.threshold == pytest.approx(R)
        assert dec.beta == pytest.approx(2.0 / R)
        # int_{|y| <= R} y^2 |y|^-2 dy = 2R
        assert dec.small_var == pytest.approx(eps ** 2 * 2.0 * R, rel=1e-12)
        assert dec.small_mean == pytest.approx(0.0, abs=1e-14)
        assert dec.negative_prob == pytest.approx(0.5)

    def test_one_sided_first_moment(self):
        model = LevyModel(d=0.3, mu=0.2, tails=TailSpec(r=1.5, c_plus=1.0), inner=InnerProfile.truncated())
        eps, rho = 0.05, 0.8
        R = eps ** -rho
        dec = decompose(model, eps, rho)
        first = 3.0 * (1.0 - R ** -0.5)
        second = 3.0 * (R ** 0.5 - 1.0)
        assert dec.small_mean == pytest.approx(eps * (0.2 + first), rel=1e-12)
        assert dec.small_var == pytest.approx(eps ** 2 * (0.3 + second), rel=1e-12)
        assert dec.negative_prob == 0.0

    def test_logpower_uses_quadrature(self, logpower_model):
        dec = decompose(logpower_model, 0.05, 0.8)
        assert dec.small_var > 0
        assert dec.small_mean == pytest.approx(0.0, abs=1e-12)
        assert dec.beta == pytest.approx(big_jump_rate(logpower_model, 0.05, 0.8))

    @pytest.mark.parametrize("eps,rho", [(0.0, 0.7), (1.0, 0.7), (0.1, 0.5), (0.1, 1.0)])
    def test_preconditions(self, cauchy_model, eps, rho):
        with pytest.raises(PreconditionError):
            decompose(cauchy_model, eps, rho)


class TestBigJumps:

    def test_pareto_inversion(self):
        tails = TailSpec(r=2.0, c_plus=1.0)
        assert invert_conditional_tail(tails, "plus", 4.0, 0.25) == pytest.approx(8.0)
        assert invert_conditional_tail(tails, "plus", 4.0, 1.0) == pytest.approx(4.0)

    @pytest.mark.parametrize("u", [0.9, 0.5, 1e-3, 1e-12, 1e-45])
    def test_logpower_inversion(self, logpower_model, u):
        tails = logpower_model.tails
        threshold = 10.0
        x = invert_conditional_tail(tails, "plus", threshold, u)
        assert x >= threshold
        assert float(tails.plus(x) / tails.plus(threshold)) == pytest.approx(u, rel=1e-8)

    def test_draw_big_jump_sign_and_size(self, asymmetric_model, rng):
        dec = decompose(asymmetric_model, 0.1, 0.7)
        draws = np.array([draw_big_jump(asymmetric_model, dec, rng) for _ in range(3000)])
        assert np.all(np.abs(draws) >= dec.threshold * (1 - 1e-12))
        assert np.mean(draws < 0) == pytest.approx(1.0 / 3.0, abs=0.05)

    def test_sign_split_within_binomial_error(self, asymmetric_model, rng):
        eps, rho, n = 0.1, 0.7, 100000
        dec = decompose(asymmetric_model, eps, rho)
        p = float(tail_minus(asymmetric_model, dec.threshold)) / dec.beta
        negative = sum(draw_big_jump(asymmetric_model, dec, rng) < 0 for _ in range(n))
        assert abs(negative / n - p) <= 3.0 * math.sqrt(p * (1.0 - p) / n)

    def test_sample_big_jump(self, rng):
        model = LevyModel(d=0.0, mu=0.0, tails=TailSpec(r=1.5, c_plus=1.0), inner=InnerProfile.truncated())
        eps, rho = 0.1, 0.7
        threshold = eps ** -rho
        draws = np.array([sample_big_jump(model, eps, rho, rng) for _ in range(4000)])
        assert np.all(draws >= threshold * (1 - 1e-12))
        # Pareto: P(W > 2R | W > R) = 2^-r
        assert np.mean(draws > 2.0 * threshold) == pytest.approx(2.0 ** -1.5, abs=0.03)

    def test_interjump_time_mean(self, cauchy_model, rng):
        dec = decompose(cauchy_model, 0.1, 0.7)
        times = [sample_interjump_time(dec, rng) for _ in range(5000)]
        assert np.mean(times) == pytest.approx(1.0 / dec.beta, rel=0.06)

    def test_no_big_jumps_without_tails(self, rng):
        dec = decompose(LevyModel.brownian(), 0.1, 0.7)
        with pytest.raises(PreconditionError):
            sample_interjump_time(dec, rng)

    def test_small_increment_moments(self, cauchy_model, rng):
        dec = decompose(cauchy_model, 0.1, 0.7)
        h = 0.01
        xs = np.array([sample_small_increment(dec, h, rng) for _ in range(4000)])
        assert np.var(xs) == pytest.approx(dec.small_var * h, rel=0.1)
        with pytest.raises(PreconditionError):
            sample_small_increment(dec, 0.0, rng)


class TestStable:

    def test_cauchy_parameters(self):
        scale, skew, shift = stable_parameters(1.0, 1.0, 1.0)
        assert scale == pytest.approx(math.pi)
        assert skew == 0.0
        assert shift == 0.0

    def test_parameter_domain(self):
        with pytest.raises(DomainError):
            stable_parameters(2.5, 1.0, 1.0)
        with pytest.raises(PreconditionError):
            stable_parameters(1.0, 0.0, 0.0)

    def test_skewed_cauchy_parameters(self):
        scale, skew, shift = stable_parameters(1.0, 0.5, 1.5)
        assert scale == pytest.approx(math.pi)
        assert skew == pytest.approx(0.5)
        assert shift == pytest.approx(1.0 - np.euler_gamma)

    def test_skewed_cauchy_characteristic_function(self, rng):
        skew = 0.6
        z = standard_stable(1.0, skew, rng, 40000)
        for u in (0.5, 2.0):
            expected = np.exp(-u * (1.0 + 1j * skew * 2.0 / math.pi * math.log(u)))
            assert abs(np.mean(np.exp(1j * u * z)) - expected) < 0.02
        # 右尾更重
        assert np.mean(z > 10.0) > np.mean(z < -10.0)

    def test_skewed_cauchy_increment(self, rng):
        eps, h = 0.1, 0.01
        c1, c2 = 0.5, 1.5
        x = stable_increment(1.0, (c1, c2), eps, h, rng, 40000)
        scale, skew = (c1 + c2) * math.pi / 2.0, (c2 - c1) / (c1 + c2)
        location = (c2 - c1) * (1.0 - np.euler_gamma)
        for u in (50.0, 200.0):
            v = eps * u
            exponent = -scale * v * (1.0 + 1j * skew * 2.0 / math.pi * math.log(v)) + 1j * location * v
            assert abs(np.mean(np.exp(1j * u * x)) - np.exp(h * exponent)) < 0.02

    def test_skew_sign(self):
        _, skew, _ = stable_parameters(1.5, 0.5, 1.0)
        assert 0 < skew < 1

    def test_standard_cauchy_quartiles(self, rng):
        z = standard_stable(1.0, 0.0, rng, 20000)
        assert np.mean(np.abs(z) < 1.0) == pytest.approx(0.5, abs=0.02)

    def test_symmetric_stable_is_centered(self, rng):
        z = standard_stable(1.5, 0.0, rng, 20000)
        assert np.median(z) == pytest.approx(0.0, abs=0.05)

    def test_increment_scaling(self, rng):
        eps, h = 0.1, 0.01
        x = stable_increment(1.0, (1.0, 1.0), eps, h, rng, 20000)
        assert np.mean(np.abs(x) < eps * math.pi * h) == pytest.approx(0.5, abs=0.02)
        with pytest.raises(PreconditionError):
            stable_increment(1.0, (1.0, 1.0), eps, 0.0, rng)

    def test_decomposition_matches_exact_in_tail(self, cauchy_model):
        # |x| > 2 eps^(1-rho) 上 compound Poisson + Gaussian 与精确 stable 增量同分布
        eps, rho, h, n = 0.1, 0.7, 0.01, 100000
        dec = decompose(cauchy_model, eps, rho)
        rng = np.random.default_rng(2024)
        counts = rng.poisson(dec.beta * h, n)
        jumps = [eps * sample_big_jump(cauchy_model, eps, rho, rng) for _ in range(int(counts.sum()))]
        decomposed = dec.small_mean * h + math.sqrt(dec.small_var * h) * rng.standard_normal(n)
        np.add.at(decomposed, np.repeat(np.arange(n), counts), jumps)
        exact = stable_increment(1.0, cauchy_model.side_densities, eps, h, rng, n)
        cut = 2.0 * eps ** (1.0 - rho)
        a, b = decomposed[np.abs(decomposed) > cut], exact[np.abs(exact) > cut]
        assert len(a) > 100 and len(b) > 100
        assert stats.ks_2samp(a, b).pvalue > 0.01


class TestRegularVariation:

    def test_pure_power_is_exact(self):
        tails = TailSpec(r=1.5, c_plus=1.0)
        assert rv_ratio_check(tails, [0.5, 1.0, 2.0], [1.0, 10.0, 100.0]) < 1e-12

    def test_logpower_converges(self, logpower_model):
        profile = rv_ratio_profile(logpower_model.tails, np.linspace(0.5, 2.0, 7), [10.0, 1e3, 1e6])
        assert np.all(np.diff(profile) < 0)

    def test_grid_checks(self):
        tails = TailSpec(r=1.5, c_plus=1.0)
        with pytest.raises(PreconditionError):
            rv_ratio_check(tails, [3.0], [1.0])
        with pytest.raises(PreconditionError):
            rv_ratio_check(tails, [1.0], [10.0, 1.0])
