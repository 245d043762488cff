import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from jcir.chf import ModelParams, invert_density, jcir_chf
from jcir.ergo import (DecayFit, TestFn, decay_distances, decay_fit, default_dictionary, fit_decay, forgetting_time,
                       moment_estimate, stationary_law, sup_moment_scan, time_average)
from jcir.ergo import test_fn_from_dict as fn_from_dict
from jcir.levy import CompoundPoisson, Exponential, GammaDensity, ParetoTail, Zero
from jcir.lyapunov import DivergentTailError
from jcir.rng import RandomStream
from jcir.sim import sample_marginal

CIR = ModelParams(1.0, 1.0, 1.0)
GAMMA_LAPLACE = (1 + 1.0 / 2.0) ** -2.0  # E e^{-X} under the stationary Gamma(2, rate 2)


class TestTestFn:
    @pytest.mark.parametrize("kind,q", [("log", 1.0), ("exp", 0.0), ("power", -1.0)])
    def test_rejects(self, kind, q):
        with pytest.raises(ValueError):
            TestFn(kind, q)

    @given(st.sampled_from(["exp", "indicator", "power"]), st.floats(0.01, 10))
    def test_round_trip(self, kind, q):
        f = TestFn(kind, q)
        assert fn_from_dict(f.to_dict()) == f

    def test_values(self):
        x = np.array([0.0, 1.0, 2.0])
        assert np.allclose(TestFn("exp", 2.0)(x), np.exp(-2 * x))
        assert np.array_equal(TestFn("indicator", 1.0)(x), [1.0, 1.0, 0.0])
        assert np.allclose(TestFn("power", 0.5)(x), np.sqrt(x))


class TestMoments:
    def test_cir_mean(self):
        e = moment_estimate(CIR, 1.0, 3.0, 1.0, 100_000, RandomStream(1))
        assert e.within(3 * math.exp(-1) + (1 - math.exp(-1)))

    def test_minimum_sample_size(self):
        with pytest.raises(ValueError):
            moment_estimate(CIR, 1.0, 1.0, 1.0, 10, RandomStream(1))

    def test_pareto_first_moment_stable(self):
        p = ModelParams(1.0, 1.0, 1.0, ParetoTail(1.5))
        est = [moment_estimate(p, 1.0, 1.0, 1.0, n, RandomStream(2, k)) for k, n in enumerate((1000, 10_000, 100_000))]
        for i in range(3):
            for j in range(i):
                assert abs(est[i].mean - est[j].mean) <= 3 * math.hypot(est[i].stderr, est[j].stderr)

    def test_scan_cir(self):
        scan = sup_moment_scan(CIR, 1.0, 3.0, 1.0, np.linspace(0, 1, 11), 20_000, RandomStream(3))
        assert scan.max.mean <= max(3.0, 1.0) + 3 * scan.max.stderr

    def test_scan_finite_activity(self, reference_model):
        scan = sup_moment_scan(reference_model, 1.0, 2.0, 1.0, np.linspace(0, 1, 11), 20_000, RandomStream(3))
        bound = 2.0 + (1.0 + reference_model.levy.first_moment()) / 1.0
        assert all(e.mean <= bound + 3 * e.stderr for e in scan.estimates)

    def test_scan_jensen(self, reference_model):
        grid = np.linspace(0, 1, 11)
        one = sup_moment_scan(reference_model, 1.0, 2.0, 1.0, grid, 20_000, RandomStream(5))
        half = sup_moment_scan(reference_model, 1.0, 2.0, 0.5, grid, 20_000, RandomStream(5))
        assert all(h.mean <= math.sqrt(o.mean) + 3 * h.stderr + 1e-12 for h, o in zip(half.estimates, one.estimates))

    def test_scan_refuses_divergent(self):
        with pytest.raises(DivergentTailError):
            sup_moment_scan(ModelParams(1, 1, 1, ParetoTail(1.5)), 1.0, 1.0, 2.0, [0, 1], 1000, RandomStream(0))


class TestStationaryLaw:
    def test_gamma_density(self):
        y = np.linspace(0.05, 6, 120)
        law = stationary_law(CIR, y_grid=y)
        assert np.max(np.abs(law.density.density - stats.gamma.pdf(y, 2, scale=0.5))) < 1e-4

    def test_chf_origin(self, reference_model):
        assert stationary_law(reference_model).chf(0.0) == pytest.approx(1.0)

    def test_long_time_chf(self, reference_model):
        law = stationary_law(reference_model)
        u = law.u_grid
        assert np.max(np.abs(law.chf_values - jcir_chf(reference_model, 10.0, 1.0, u))) < 1e-3

    def test_expectations_gamma(self):
        law = stationary_law(CIR)
        assert law.expect(TestFn("exp", 1.0)) == pytest.approx(GAMMA_LAPLACE, abs=1e-10)
        assert law.expect(TestFn("indicator", 1.0)) == pytest.approx(stats.gamma.cdf(1.0, 2, scale=0.5), abs=1e-6)

    def test_heavy_tail_cdf_monotone(self):
        law = stationary_law(ModelParams(1.0, 1.0, 1.0, ParetoTail(0.5)))
        cdf = law.cdf(np.array([0.5, 1.0, 2.0, 4.0, 8.0]))
        assert np.all(np.diff(cdf) > 0) and 0 < cdf[0] and cdf[-1] < 1

    def test_rejects_unbounded(self, reference_model):
        with pytest.raises(ValueError):
            stationary_law(reference_model).expect(TestFn("power", 1.0))


class TestBoundedExpectations:
    # the y = 0 endpoint carries the inversion error; the integral does not see one point
    @pytest.mark.filterwarnings("ignore::jcir.chf.InversionWarning")
    def test_density_and_mc_agree(self, reference_model):
        y = np.linspace(0.0, 40.0, 2001)
        g = invert_density(reference_model, 1.0, 1.0, y)
        by_density = integrate.simpson(np.exp(-y) * g.density, x=y)
        x = sample_marginal(reference_model, 1.0, 1.0, 100_000, RandomStream(7))
        e = np.exp(-x)
        assert abs(e.mean() - by_density) <= 3 * e.std(ddof=1) / math.sqrt(x.size) + g.inversion_error_estimate


class TestTimeAverage:
    def test_gamma_laplace(self):
        reps = [time_average(CIR, TestFn("exp", 1.0), 2000.0, 0.0, 0.05, RandomStream(1, k)) for k in range(4)]
        mean = np.mean([e.mean for e in reps])
        se = math.sqrt(sum(e.stderr**2 for e in reps)) / len(reps)
        assert abs(mean - GAMMA_LAPLACE) <= 3 * se

    def test_linear_mean(self, reference_model):
        e = time_average(reference_model, TestFn("power", 1.0), 2000.0, 1.0, 0.05, RandomStream(2))
        assert e.within(1.0 + reference_model.levy.first_moment())

    def test_indicator_against_stationary_cdf(self, reference_model):
        f = TestFn("indicator", 2.0)
        e = time_average(reference_model, f, 2000.0, 1.0, 0.05, RandomStream(3))
        assert e.within(stationary_law(reference_model).expect(f))

    def test_start_independence(self, reference_model):
        f = TestFn("exp", 1.0)
        a = time_average(reference_model, f, 2000.0, 0.0, 0.05, RandomStream(4, 0))
        b = time_average(reference_model, f, 2000.0, 50.0, 0.05, RandomStream(4, 1))
        assert abs(a.mean - b.mean) <= 3 * math.hypot(a.stderr, b.stderr)


class TestDecay:
    def test_dictionary(self):
        d = default_dictionary(CIR)
        assert len(d) == 8 and sum(f.kind == "exp" for f in d) == 4

    def test_fit_recovers_rate(self):
        t = np.linspace(1, 8, 8)
        d = 2.0 * np.exp(-0.7 * t)
        fit = fit_decay(t, d, 0.01 * d)
        assert fit.rate == pytest.approx(0.7, rel=1e-9) and fit.prefactor == pytest.approx(2.0, rel=1e-9)

    def test_fit_below_resolution(self):
        fit = fit_decay([1.0, 2.0, 3.0], [1e-4, 1e-4, 1e-4], [1e-3, 1e-3, 1e-3])
        assert fit.outcome == "decay below MC resolution"

    def test_fit_honours_burn_in(self):
        t = np.arange(1.0, 9.0)
        d = np.exp(-0.5 * t)
        fit = fit_decay(t, d, 0.01 * d, burn_in=4.0)
        assert not fit.used[:3].any() and fit.used[4:].all()

    def test_cir_monotone(self):
        times = np.array([0.5, 1.0, 2.0, 4.0])
        d, se = decay_distances(CIR, 5.0, times, 100_000, RandomStream(5))
        fit = fit_decay(times, d, se)
        assert fit.monotone(slack=2.0) and np.all(d >= 0)

    def test_forgetting_time_grows_with_start(self):
        assert forgetting_time(CIR, 20.0) > forgetting_time(CIR, 0.0)

    def test_refuses_without_tail_moment(self):
        from jcir.levy import Pareto
        p = ModelParams(1.0, 1.0, 1.0, CompoundPoisson(1.0, Pareto(0.005)))
        with pytest.raises(DivergentTailError):
            decay_fit(p, 0.0, [1.0, 2.0], 1000, RandomStream(0))

    def test_serializes(self):
        t = np.linspace(1, 4, 4)
        d = np.exp(-t)
        assert fit_decay(t, d, 0.01 * d, x0=0.0).to_dict()["outcome"] == "fitted"
