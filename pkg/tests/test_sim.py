import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from jcir.chf import ModelParams, cir_chf, jcir_chf
from jcir.levy import CompoundPoisson, Exponential, GammaDensity, ParetoTail, Zero
from jcir.rng import RandomStream
from jcir.sim import (Path, Scheme, cir_exact, euler_coupled_cir, euler_path, jcir_exact_oneshot, jcir_exact_path,
                      jump_contributions, sample_marginal, sample_paths)


def se_check(x, target, n_se=3.0):
    x = np.asarray(x)
    return abs(x.mean() - target) <= n_se * x.std(ddof=1) / math.sqrt(x.size)


def ncx2_cdf(params, t, x0, y):
    c = params.sigma**2 * (1 - math.exp(-params.b * t)) / (4 * params.b)
    df = 4 * params.a / params.sigma**2
    return stats.ncx2.cdf(np.asarray(y) / c, df, x0 * math.exp(-params.b * t) / c)


class TestSchemeAndPath:
    @pytest.mark.parametrize("kwargs", [{"kind": "milstein"}, {"kind": "euler", "eps": 1e-3},
                                        {"kind": "euler", "dt": -1.0, "eps": 1e-3}, {"kind": "euler", "dt": 0.1}])
    def test_scheme_rejects(self, kwargs):
        with pytest.raises(ValueError):
            Scheme(**kwargs)

    @pytest.mark.parametrize("times,values", [([0.5, 1.0], [1.0, 2.0]), ([0.0, 0.0], [1.0, 1.0]),
                                              ([0.0, 1.0], [1.0, -0.1])])
    def test_path_rejects(self, times, values):
        with pytest.raises(ValueError):
            Path(times, values)


class TestCirExact:
    def test_degenerate(self):
        x = cir_exact(ModelParams(0.0, 1.0, 1.0), 1.0, 0.0, np.random.default_rng(0), 1000)
        assert np.all(x == 0)

    def test_mean(self):
        p = ModelParams(0.7, 1.3, 0.9)
        x = cir_exact(p, 1.0, 2.0, np.random.default_rng(1), 100_000)
        assert se_check(x, 2.0 * math.exp(-1.3) + (0.7 / 1.3) * (1 - math.exp(-1.3)))

    def test_laplace(self, cir_model):
        x = cir_exact(cir_model, 1.0, 1.0, np.random.default_rng(2), 100_000)
        assert se_check(np.exp(-x), cir_chf(cir_model, 1.0, 1.0, -1.0).real)

    def test_zero_atom_only_when_a_zero(self):
        p = ModelParams(0.0, 1.0, 1.0)
        x = cir_exact(p, 1.0, 0.5, np.random.default_rng(3), 100_000)
        c = (1 - math.exp(-1)) / 2
        p0 = math.exp(-0.5 * math.exp(-1) / c)
        assert abs(np.mean(x == 0) - p0) <= 3 * math.sqrt(p0 * (1 - p0) / x.size)
        y = cir_exact(ModelParams(0.1, 1.0, 1.0), 1.0, 0.5, np.random.default_rng(3), 100_000)
        assert np.all(y > 0)

    def test_ks_against_ncx2(self, cir_model):
        x = cir_exact(cir_model, 0.5, 2.0, np.random.default_rng(4), 100_000)
        assert stats.kstest(x, lambda y: ncx2_cdf(cir_model, 0.5, 2.0, y)).pvalue > 1e-3


class TestOneShot:
    def test_zero_measure_matches_cir(self, cir_model):
        a = jcir_exact_oneshot(cir_model, 1.0, 1.0, np.random.default_rng(5), 10_000)
        b = cir_exact(cir_model, 1.0, 1.0, np.random.default_rng(6), 10_000)
        assert stats.ks_2samp(a, b).statistic < 0.025

    def test_no_jump_frequency(self, reference_model):
        gen = np.random.default_rng(7)
        empty = np.array([len(jump_contributions(reference_model, 1.0, gen)) == 0 for _ in range(20_000)])
        p0 = math.exp(-0.5)
        assert abs(empty.mean() - p0) <= 3 * math.sqrt(p0 * (1 - p0) / empty.size)

    def test_chf_five_points(self, reference_model):
        x = jcir_exact_oneshot(reference_model, 1.0, 1.0, np.random.default_rng(8), 100_000)
        for u in (-2.0, -1.0, -0.5, 1j, 2j):
            e = np.exp(u * x)
            se = math.sqrt((e.real.var(ddof=1) + e.imag.var(ddof=1)) / x.size)
            assert abs(e.mean() - jcir_chf(reference_model, 1.0, 1.0, u)) <= 3 * se

    @given(st.floats(0.05, 3), st.floats(0, 5), st.integers(0, 2**32 - 1))
    @settings(max_examples=20, deadline=None)
    def test_nonnegative(self, t, x0, seed):
        p = ModelParams(0.3, 1.0, 1.5, ParetoTail(0.8))
        assert np.all(jcir_exact_oneshot(p, t, x0, np.random.default_rng(seed), 200) >= 0)


class TestPaths:
    def test_zero_measure_marginals(self, cir_model):
        grid = [0.0, 0.25, 1.0, 2.0]
        path = jcir_exact_path(cir_model, grid, 1.0, np.random.default_rng(9), 10_000)
        for k, t in enumerate(grid[1:], start=1):
            ref = cir_exact(cir_model, t, 1.0, np.random.default_rng(10 + k), 10_000)
            assert stats.ks_2samp(path.values[:, k], ref).statistic < 0.025

    def test_marginal_matches_oneshot(self, reference_model):
        path = jcir_exact_path(reference_model, [0.0, 0.5, 1.0], 1.0, np.random.default_rng(11), 10_000)
        ref = jcir_exact_oneshot(reference_model, 1.0, 1.0, np.random.default_rng(12), 10_000)
        assert stats.ks_2samp(path.at(1.0), ref).statistic < 0.025
        assert np.all(path.values >= 0) and path.times[0] == 0

    def test_euler_grid_must_align(self, reference_model):
        with pytest.raises(ValueError):
            euler_path(reference_model, 0.3, 1e-3, [0.0, 1.0], 1.0, np.random.default_rng(0), 10)


class TestEuler:
    def test_nonnegative(self, reference_model):
        path = euler_path(ModelParams(0.1, 1.0, 2.0), 0.05, 1e-3, np.arange(0, 2.01, 0.05), 0.1,
                          np.random.default_rng(1), 2000)
        assert np.all(path.values >= 0)

    def test_finite_activity_ks(self, reference_model):
        x = sample_marginal(reference_model, 1.0, 1.0, 10_000, RandomStream(1), Scheme("euler", 1e-3, 1e-3))
        ref = sample_marginal(reference_model, 1.0, 1.0, 10_000, RandomStream(2), Scheme("exact"))
        assert stats.ks_2samp(x, ref).statistic < 0.03

    def test_bias_decreases_with_dt(self):
        # Feller-violating parameters make the boundary bias visible above MC noise
        p = ModelParams(0.25, 1.0, 1.0)
        xs = euler_coupled_cir(p, 1.0, 1.0, [0.1, 0.01, 0.001], np.random.default_rng(3), 100_000)
        ks = [stats.kstest(xs[dt], lambda y: ncx2_cdf(p, 1.0, 1.0, y)).statistic for dt in (0.1, 0.01, 0.001)]
        assert ks[0] > ks[1] > ks[2]

    @pytest.mark.parametrize("a", [1.0, 0.25])
    def test_weak_order_one(self, a):
        p = ModelParams(a, 1.0, 1.0)
        dts = [0.1, 0.05, 0.025, 0.0125, 0.00625]
        xs = euler_coupled_cir(p, 1.0, 1.0, dts, np.random.default_rng(4), 200_000)
        means = np.array([np.exp(-xs[d]).mean() for d in dts])
        slope = np.polyfit(np.log(dts[:-1]), np.log(np.abs(np.diff(means))), 1)[0]
        assert 0.7 <= slope <= 1.3

    def test_gamma_mean_with_compensation(self):
        p = ModelParams(1.0, 1.0, 1.0, GammaDensity(1.0, 1.0))
        x = sample_marginal(p, 1.0, 2.0, 20_000, RandomStream(5), Scheme("euler", 1e-3, 1e-3, True))
        m1 = p.levy.first_moment()
        assert se_check(x, 2.0 * math.exp(-1) + (1.0 + m1) * (1 - math.exp(-1)))


class TestReproducibility:
    @pytest.mark.parametrize("scheme", [Scheme("exact"), Scheme("euler", 0.01, 1e-3)])
    def test_thread_invariant(self, reference_model, scheme):
        a = sample_marginal(reference_model, 1.0, 1.0, 45_000, RandomStream(3), scheme, threads=1)
        b = sample_marginal(reference_model, 1.0, 1.0, 45_000, RandomStream(3), scheme, threads=4)
        assert np.array_equal(a, b)

    def test_paths_thread_invariant(self, reference_model):
        grid = [0.0, 0.5, 1.0]
        a = sample_paths(reference_model, grid, 1.0, 30_000, RandomStream(4), Scheme("exact"), threads=1)
        b = sample_paths(reference_model, grid, 1.0, 30_000, RandomStream(4), Scheme("exact"), threads=3)
        assert np.array_equal(a.values, b.values)

    def test_streams_differ(self, reference_model):
        a = sample_marginal(reference_model, 1.0, 1.0, 100, RandomStream(3, 0))
        b = sample_marginal(reference_model, 1.0, 1.0, 100, RandomStream(3, 1))
        assert not np.array_equal(a, b)
