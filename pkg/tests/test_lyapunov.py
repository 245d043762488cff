import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jcir.chf import ModelParams
from jcir.levy import CompoundPoisson, Exponential, GammaDensity, ParetoTail, PointMass, Zero
from jcir.lyapunov import (DivergentTailError, Identity, Log, PowerKappa, apply_generator, bridge_coefficients,
                           check_log_drift, check_power_drift, diffusion_part, drift_transfer_check, dynkin_check,
                           generator_table, lyapunov_from_dict)
from jcir.rng import RandomStream

PARETO_15 = ModelParams(1.0, 1.0, 1.0, ParetoTail(1.5))
PARETO_05 = ModelParams(1.0, 1.0, 1.0, ParetoTail(0.5))


class TestFunctions:
    @given(st.floats(0, 1e4), st.floats(0, 1e4))
    @settings(max_examples=100, deadline=None)
    @pytest.mark.parametrize("fn", [Log(), Identity(), PowerKappa(0.25), PowerKappa(0.5), PowerKappa(2.0)])
    def test_increment_matches_values(self, fn, x, z):
        assert fn.increment(x, z) == pytest.approx(fn.value(x + z) - fn.value(x), rel=1e-9, abs=1e-9)

    @pytest.mark.parametrize("kappa", [0.1, 0.25, 0.5, 0.9, 1.0, 3.0])
    def test_bridge_is_c2_at_one(self, kappa):
        fn, k = PowerKappa(kappa), min(kappa, 1.0)
        h = 1e-6
        assert fn.value(1.0) == pytest.approx(1.0)
        assert fn.d1(1.0 - h) == pytest.approx(k, abs=1e-5) and fn.d1(1.0 + h) == pytest.approx(k, abs=1e-5)
        assert fn.d2(1.0 - h) == pytest.approx(k * (k - 1), abs=1e-4)
        assert fn.d2(1.0 + h) == pytest.approx(k * (k - 1), abs=1e-4)
        assert fn.value(0.0) == 0 and fn.d1(0.0) == 0 and fn.d2(0.0) == 0

    @given(st.floats(0.01, 3.0), st.floats(0.0, 1.0))
    @settings(max_examples=100, deadline=None)
    def test_bridge_nonnegative(self, kappa, x):
        assert PowerKappa(kappa).value(x) >= 0

    def test_bridge_coefficients_solve_conditions(self):
        c3, c4, c5 = bridge_coefficients(0.5)
        assert c3 + c4 + c5 == pytest.approx(1.0)

    @pytest.mark.parametrize("fn", [Log(), Identity(), PowerKappa(0.25)])
    def test_round_trip(self, fn):
        assert lyapunov_from_dict(fn.to_dict()) == fn


class TestGenerator:
    @given(st.floats(0, 1e3))
    @settings(max_examples=50, deadline=None)
    def test_identity_on_cir(self, x):
        p = ModelParams(1.3, 0.7, 0.9)
        assert apply_generator(p, Identity(), x) == pytest.approx(1.3 - 0.7 * x, rel=1e-14, abs=1e-14)

    @pytest.mark.parametrize("levy", [CompoundPoisson(0.5, Exponential(2.0)), GammaDensity(1.0, 1.0), PARETO_15.levy,
                                      CompoundPoisson(2.0, PointMass(3.0))])
    @pytest.mark.parametrize("x", [0.0, 1.0, 50.0])
    def test_identity_jump_part_is_first_moment(self, levy, x):
        p = ModelParams(1.0, 1.0, 1.0, levy)
        assert apply_generator(p, Identity(), x) - (1 - x) == pytest.approx(levy.first_moment(), rel=1e-8)

    def test_log_limit(self):
        assert abs(apply_generator(PARETO_15, Log(), 1e6) + 1.0) < 1e-3

    @pytest.mark.parametrize("x", [1.0, 5.0, 300.0])
    def test_power_diffusion_part(self, x):
        k, p = 0.5, PARETO_15
        expected = -p.b * k * x**k + k * x ** (k - 1) * (p.a + p.sigma**2 * (k - 1) / 2)
        assert diffusion_part(p, PowerKappa(k), x) == pytest.approx(expected, rel=1e-12)

    def test_rejects_negative_state(self):
        with pytest.raises(ValueError):
            apply_generator(PARETO_15, Log(), -1.0)

    def test_table_consistency(self):
        dv, jv, av = generator_table(PARETO_15, Log(), [0.0, 1.0, 10.0])
        assert np.allclose(dv + jv, av)


class TestLogDrift:
    def test_cir(self):
        p = ModelParams(1.0, 1.0, 1.0)
        rep = check_log_drift(p, np.linspace(0, 200, 801), K=2 * p.a / p.b + 1)
        assert rep.satisfied and rep.c == 0.5

    @pytest.mark.parametrize("a_t", [1.5, 0.8])
    def test_pareto(self, a_t):
        rep = check_log_drift(ModelParams(1.0, 1.0, 1.0, ParetoTail(a_t)), np.linspace(0, 1e3, 1001))
        assert rep.satisfied and rep.worst_margin >= 0 and math.isfinite(rep.M)

    def test_bounded_by_analytic_bound(self):
        rep = check_log_drift(PARETO_15, np.linspace(0, 1e3, 1001))
        assert np.max(np.abs(rep.av_values)) <= rep.analytic_bound

    def test_satisfied_iff_margin(self):
        rep = check_log_drift(PARETO_15, np.linspace(0, 1e3, 1001), c=0.5)
        assert rep.satisfied == (rep.worst_margin >= 0)

    def test_short_grid_rejects_explicit_K(self):
        with pytest.raises(ValueError):
            check_log_drift(PARETO_15, np.linspace(0, 5, 11), K=10.0)

    def test_requires_positive_a(self):
        with pytest.raises(ValueError, match="a > 0"):
            check_log_drift(ModelParams(0.0, 1.0, 1.0), [0.0, 1.0])


class TestPowerDrift:
    def test_linear_case(self):
        # V = x beyond 1, so AV + bV = a there; the bridge on [0, 1] sets M
        rep = check_power_drift(ModelParams(1.0, 1.0, 1.0), 1.0, np.linspace(0, 100, 201), c=1.0)
        beyond = rep.grid >= 1
        assert np.allclose(rep.av_values[beyond] + rep.grid[beyond], 1.0, atol=1e-12)
        assert rep.satisfied and rep.M >= 1.0

    def test_pareto_15_half(self):
        assert check_power_drift(PARETO_15, 0.5, np.linspace(0, 1e3, 1001)).satisfied

    def test_heavy_tail_regime(self):
        rep = check_power_drift(PARETO_05, 0.25, np.linspace(0, 1e3, 1001))
        assert rep.satisfied and rep.c == pytest.approx(0.125)

    def test_refuses_divergent(self):
        with pytest.raises(DivergentTailError, match="kappa = 2"):
            check_power_drift(PARETO_15, 2.0, np.linspace(0, 10, 11))

    def test_rejects_c_above_rate(self):
        with pytest.raises(ValueError):
            check_power_drift(PARETO_15, 0.5, np.linspace(0, 10, 11), c=1.0)

    def test_serializes(self):
        d = check_power_drift(PARETO_05, 0.25, np.linspace(0, 100, 101)).to_dict()
        assert d["condition"] == "power-form" and "M" in d


class TestMonteCarloChecks:
    def test_dynkin(self, reference_model):
        rep = dynkin_check(reference_model, Log(), 1.0, 2.0, 100_000, RandomStream(6))
        assert rep.passed and rep.interpolation_error < 1e-6

    def test_dynkin_needs_finite_activity(self):
        with pytest.raises(ValueError):
            dynkin_check(ModelParams(1, 1, 1, GammaDensity(1, 1)), Log(), 1.0, 1.0, 1000, RandomStream(0))

    def test_drift_transfer(self):
        rep = check_power_drift(PARETO_05, 0.25, np.linspace(0, 1e3, 1001))
        rows = drift_transfer_check(PARETO_05, rep, [0, 1, 10, 100], [0.5, 1, 5], 20_000, RandomStream(8))
        assert len(rows) == 12 and all(r["passed"] for r in rows)
