import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from jcir.bessel import (BesselParams, bessel_chf, bessel_moment, bessel_pdf, bessel_sample,
                         jump_bessel_params, moment_bound_scan)

GRID = [(a, b) for a in (0.5, 2.0, 8.0) for b in (0.5, 2.0, 8.0)]


def mixture_pdf(alpha, beta, x, terms=200):
    n = np.arange(1, terms)
    logw = -alpha + n * math.log(alpha) - special.gammaln(n + 1)
    return float(np.sum(np.exp(logw + n * math.log(beta) + (n - 1) * math.log(x) - beta * x - special.gammaln(n))))


class TestParams:
    @pytest.mark.parametrize("alpha,beta", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (math.nan, 1.0)])
    def test_rejects_nonpositive(self, alpha, beta):
        with pytest.raises(ValueError):
            BesselParams(alpha, beta)

    def test_jump_params_formula(self):
        z, s, b, sigma = 2.0, 0.7, 1.3, 0.9
        c = sigma**2 * (1 - math.exp(-b * s)) / (2 * b)
        alpha, beta = jump_bessel_params(z, s, b, sigma)
        assert alpha == pytest.approx(z * math.exp(-b * s) / c)
        assert beta == pytest.approx(1 / c)


class TestPdf:
    def test_atom(self):
        atom, dens = bessel_pdf(BesselParams(1.0, 1.0), 0.0)
        assert atom == pytest.approx(math.exp(-1.0), rel=1e-15)
        assert dens == pytest.approx(math.exp(-1.0), rel=1e-14)

    @pytest.mark.parametrize("alpha,beta", GRID)
    def test_total_mass(self, alpha, beta):
        p = BesselParams(alpha, beta)
        body, _ = integrate.quad(lambda x: bessel_pdf(p, x)[1], 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
        assert bessel_pdf(p, 1.0)[0] + body == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("x", [0.1, 0.5, 2.0, 7.0])
    def test_series_identity(self, x):
        assert bessel_pdf(BesselParams(2.0, 3.0), x)[1] == pytest.approx(mixture_pdf(2.0, 3.0, x), rel=1e-12)


class TestChf:
    def test_origin(self):
        assert bessel_chf(BesselParams(1.5, 0.5), 0.0) == 1.0

    def test_known_value(self):
        assert bessel_chf(BesselParams(1.0, 2.0), -2.0) == pytest.approx(math.exp(-0.5), rel=1e-14)

    def test_modulus_on_imaginary_axis(self):
        y = np.linspace(-50, 50, 1001)
        assert np.all(np.abs(bessel_chf(BesselParams(3.0, 0.7), 1j * y)) <= 1 + 1e-14)

    @given(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(0.05, 20), st.floats(-20, 0), st.floats(-20, 20))
    @settings(max_examples=100, deadline=None)
    def test_scaling(self, alpha, beta, c, ur, ui):
        u = complex(ur, ui)
        lhs = bessel_chf(BesselParams(alpha, beta / c), u)
        rhs = bessel_chf(BesselParams(alpha, beta), c * u)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


class TestMoment:
    @given(st.floats(0.01, 100), st.floats(0.01, 100))
    @settings(max_examples=50, deadline=None)
    def test_mean(self, alpha, beta):
        assert bessel_moment(BesselParams(alpha, beta), 1.0) == pytest.approx(alpha / beta, rel=1e-12)

    def test_second_moment_series(self):
        k = np.arange(0, 80)
        series = math.exp(-1) * np.sum(np.exp(special.gammaln(k + 3) - special.gammaln(k + 1) - special.gammaln(k + 2)))
        assert bessel_moment(BesselParams(1.0, 1.0), 2.0) == pytest.approx(series, rel=1e-12)

    def test_second_moment_closed_form(self):
        # variance of a compound Poisson-Gamma is alpha * 2 / beta^2
        a, b = 3.0, 2.0
        assert bessel_moment(BesselParams(a, b), 2.0) == pytest.approx((a / b) ** 2 + 2 * a / b**2, rel=1e-12)

    def test_fractional_against_quadrature(self):
        p = BesselParams(4.0, 2.0)
        num, _ = integrate.quad(lambda x: x**0.5 * bessel_pdf(p, x)[1], 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
        assert bessel_moment(p, 0.5) == pytest.approx(num, rel=1e-9)

    @pytest.mark.parametrize("alpha,beta", GRID)
    @pytest.mark.parametrize("kappa", [1.0, 2.0])
    def test_sampler_agrees(self, alpha, beta, kappa):
        p = BesselParams(alpha, beta)
        x = bessel_sample(p, np.random.default_rng(11), 100_000) ** kappa
        assert abs(x.mean() - bessel_moment(p, kappa)) <= 3 * x.std(ddof=1) / math.sqrt(x.size)


class TestSampler:
    def test_nonnegative(self):
        assert np.all(bessel_sample(BesselParams(0.3, 5.0), np.random.default_rng(0), 10_000) >= 0)

    @pytest.mark.parametrize("alpha,beta", [(0.5, 1.0), (2.0, 3.0), (8.0, 0.5)])
    def test_atom_and_mean(self, alpha, beta):
        x = bessel_sample(BesselParams(alpha, beta), np.random.default_rng(5), 100_000)
        p0 = math.exp(-alpha)
        assert abs(np.mean(x == 0) - p0) <= 3 * math.sqrt(p0 * (1 - p0) / x.size)
        assert abs(x.mean() - alpha / beta) <= 3 * x.std(ddof=1) / math.sqrt(x.size)

    def test_laplace_at_minus_one(self):
        x = bessel_sample(BesselParams(2.0, 3.0), np.random.default_rng(6), 100_000)
        e = np.exp(-x)
        assert abs(e.mean() - math.exp(-0.5)) <= 3 * e.std(ddof=1) / math.sqrt(x.size)

    def test_chf_ten_points(self):
        p = BesselParams(2.0, 0.7)
        x = bessel_sample(p, np.random.default_rng(7), 100_000)
        for u in -np.geomspace(0.05, 20, 10):
            e = np.exp(u * x)
            assert abs(e.mean() - bessel_chf(p, u).real) <= 3 * e.std(ddof=1) / math.sqrt(x.size)

    def test_reproducible(self):
        p = BesselParams(2.0, 1.0)
        a = bessel_sample(p, np.random.default_rng(3), 1000)
        b = bessel_sample(p, np.random.default_rng(3), 1000)
        assert np.array_equal(a, b)


class TestMomentBoundScan:
    GRID = [(a, b) for a in np.geomspace(1, 100, 3) for b in np.geomspace(0.1, 10, 3)]

    def test_kappa_one_degenerate(self):
        rep = moment_bound_scan(1.0, 1.0, self.GRID)
        assert max(abs(r - 1) for r in rep.lower_ratios) <= 1e-10
        assert rep.upper_ratio_sup <= 1.0

    def test_half_lower_bound_positive(self):
        rep = moment_bound_scan(0.5, 1.0, self.GRID)
        assert rep.lower_ratio_inf > 0
        p = BesselParams(4.0, 2.0)
        assert bessel_moment(p, 0.5) >= rep.lower_ratio_inf * (4.0 / 2.0) ** 0.5

    def test_two_upper_bound_finite(self):
        rep = moment_bound_scan(2.0, 1.0, self.GRID)
        assert math.isfinite(rep.upper_ratio_sup)

    def test_report_serializes(self):
        d = moment_bound_scan(2.0, 1.0, self.GRID).to_dict()
        assert d["kappa"] == 2.0 and len(d["upper_ratios"]) == 9
