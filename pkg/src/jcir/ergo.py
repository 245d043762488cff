"""Monte Carlo diagnostics for moments and ergodicity of the JCIR process."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chf import (DensityGrid, ModelParams, _cos_coefficients, _cos_density, _default_support,
                  cdf_gil_pelaez, cir_decay_cutoff, stationary_chf)
from .lyapunov import DivergentTailError, require_log_tail, require_tail_moment
from .rng import MCEstimate, RandomStream, batch_means
from .sim import Scheme, _exact_path_block, _euler_block, default_scheme, sample_marginal, sample_paths

MIN_MOMENT_SAMPLES = 1000
N_BATCHES = 20


# --------------------------------------------------------------------------
# test functions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFn:
    """``exp``: ``e^{-q x}``; ``indicator``: ``1{x <= q}``; ``power``: ``x^q``."""

    kind: str
    q: float = 1.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.kind not in ("exp", "indicator", "power"):
            raise ValueError(f"unknown test function {self.kind!r}")
        if not self.q > 0:
            raise ValueError("test function parameter must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exp":
            return np.exp(-self.q * x)
        if self.kind == "indicator":
            return (x <= self.q).astype(float)
        return x**self.q

    @property
    def bounded(self) -> bool:
        return self.kind != "power"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q": self.q}


def test_fn_from_dict(d: dict) -> TestFn:
    return TestFn(str(d["kind"]), float(d.get("q", 1.0)))


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------


def moment_estimate(params: ModelParams, t: float, x0: float, kappa: float, n: int, rng: RandomStream,
                    scheme: Scheme | None = None, threads: int = 1) -> MCEstimate:
    """MC mean of ``X_t^kappa``; exact sampler for finite activity, Euler otherwise."""
    if n < MIN_MOMENT_SAMPLES:
        raise ValueError(f"moment estimates need n >= {MIN_MOMENT_SAMPLES}")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    x = sample_marginal(params, t, x0, n, rng, scheme, threads)
    return MCEstimate.from_samples(x**kappa, rng.seed)


@dataclass
class SupMomentScan:
    times: np.ndarray
    estimates: list[MCEstimate]

    @property
    def max(self) -> MCEstimate:
        return max(self.estimates, key=lambda e: e.mean)


def sup_moment_scan(params: ModelParams, T: float, x0: float, kappa: float, time_grid, n: int,
                    rng: RandomStream, scheme: Scheme | None = None, threads: int = 1) -> SupMomentScan:
    """``E_x[X_t^kappa]`` along ``time_grid`` in ``[0, T]`` from one batch of paths."""
    require_tail_moment(params.levy, kappa, "moment scan")
    if n < MIN_MOMENT_SAMPLES:
        raise ValueError(f"moment estimates need n >= {MIN_MOMENT_SAMPLES}")
    times = np.asarray(time_grid, dtype=float)
    if np.any(times < 0) or np.any(times > T) or np.any(np.diff(times) <= 0):
        raise ValueError("time_grid must be increasing within [0, T]")
    grid = times if times[0] == 0 else np.concatenate([[0.0], times])
    path = sample_paths(params, grid, x0, n, rng, scheme, threads)
    cols = path.values[:, -times.size:]
    ests = [MCEstimate.from_samples(cols[:, j] ** kappa, rng.seed) for j in range(times.size)]
    return SupMomentScan(times, ests)


# --------------------------------------------------------------------------
# stationary law
# --------------------------------------------------------------------------


@dataclass
class StationaryLaw:
    params: ModelParams
    u_grid: np.ndarray
    chf_values: np.ndarray
    density: DensityGrid | None
    s_horizon: float | None
    provenance: str = "large-time limit of the transition characteristic function"
    _cache: dict = field(default_factory=dict, repr=False)

    def chf(self, u):
        return stationary_chf(self.params, u, self.s_horizon)

    def expect(self, f: TestFn, tol: float = 1e-6) -> float:
        """``pi(f)`` for bounded ``f`` (exact transform for ``exp``, Gil-Pelaez for indicators)."""
        return float(self.expect_many([f], tol)[0])

    def expect_many(self, fns: list[TestFn], tol: float = 1e-6) -> np.ndarray:
        """``pi(f)`` for several bounded functions; indicators share one inversion."""
        if not all(f.bounded for f in fns):
            raise ValueError("only bounded test functions have a computable stationary mean here")
        missing = [f for f in fns if (f.kind, f.q) not in self._cache]
        exps = [f for f in missing if f.kind == "exp"]
        inds = [f for f in missing if f.kind == "indicator"]
        if exps:
            vals = np.real(np.atleast_1d(self.chf(np.array([-f.q for f in exps], dtype=complex))))
            self._cache.update({(f.kind, f.q): float(v) for f, v in zip(exps, vals)})
        if inds:
            vals = self.cdf([f.q for f in inds], tol)
            self._cache.update({(f.kind, f.q): float(v) for f, v in zip(inds, vals)})
        return np.array([self._cache[(f.kind, f.q)] for f in fns])

    def cdf(self, y, tol: float = 1e-6) -> np.ndarray:
        """Gil-Pelaez inversion; ``tol`` bounds the truncated frequency tail."""
        omega = cir_decay_cutoff(self.params, None, tol)
        chf = lambda u: stationary_chf(self.params, u, self.s_horizon, epsrel=1e-9)
        return np.clip(cdf_gil_pelaez(chf, y, omega), 0.0, 1.0)


def stationary_law(params: ModelParams, u_grid=None, s_horizon: float | None = None, y_grid=None,
                   n_terms: int = 8192) -> StationaryLaw:
    """Transform of the invariant law on ``u_grid`` plus its density on ``y_grid`` (COS inversion).

    The density is only inverted when the law has a finite second moment,
    since the cosine expansion needs a truncation range.
    """
    require_log_tail(params.levy, "stationary law")
    params.require_positive_a("stationary law")
    H = None if s_horizon is None else float(s_horizon)
    u = np.asarray(u_grid if u_grid is not None else 1j * np.linspace(0.0, 20.0, 81))
    vals = np.asarray(stationary_chf(params, u, H))
    dens = None
    if y_grid is not None:
        y = np.asarray(y_grid, dtype=float)
        L = _default_support(params, None, 0.0, float(y.max()))
        chf = lambda w: stationary_chf(params, w, H)
        coef_big = _cos_coefficients(chf, 2 * L, 2 * n_terms)
        fine = _cos_density(coef_big, 2 * L, y)
        base = _cos_density(coef_big[::2], L, y)
        coarse = _cos_density(coef_big[::2][: n_terms // 2], L, y)
        err = float(np.max(np.abs(fine - base)) + np.max(np.abs(base - coarse)))
        interior = (y > y.min()) & (y < y.max())
        dens = DensityGrid(math.inf, math.nan, list(zip(y.tolist(), fine.tolist())), err,
                           float(fine[interior].min()) if interior.any() else float(fine.min()), L, 2 * n_terms)
    return StationaryLaw(params, u, vals, dens, H)


# --------------------------------------------------------------------------
# time averages
# --------------------------------------------------------------------------


def long_path(params: ModelParams, T: float, x0: float, dt_obs: float, rng: RandomStream,
              scheme: Scheme | None = None) -> tuple[np.ndarray, np.ndarray]:
    """One path observed every ``dt_obs`` on ``[0, T]``."""
    scheme = scheme or default_scheme(params)
    n_obs = int(round(T / dt_obs))
    grid = dt_obs * np.arange(n_obs + 1)
    gen = rng.generator()
    if scheme.kind == "exact":
        vals = _exact_path_block(params, grid, x0, gen, 1)[0]
    else:
        vals = _euler_block(params, grid, x0, scheme.dt, scheme.eps, scheme.compensate, gen, 1)[0]
    return grid, vals


def time_average(params: ModelParams, f: TestFn, T: float, x0: float, dt_obs: float, rng: RandomStream,
                 burn_in: float | None = None, scheme: Scheme | None = None) -> MCEstimate:
    """Riemann average of ``f(X_s)`` over ``[burn_in, T]`` with a batch-means standard error.

    ``burn_in`` defaults to ``5 / b``.  The returned ``n`` counts observations.
    """
    require_log_tail(params.levy, "time average")
    params.require_positive_a("time average")
    burn = 5.0 / params.b if burn_in is None else float(burn_in)
    if not T > burn:
        raise ValueError("T must exceed the burn-in")
    times, vals = long_path(params, T, x0, dt_obs, rng, scheme)
    keep = times[1:] > burn
    # left-point Riemann sum on each observation interval after the burn-in
    series = f(vals[:-1][keep])
    mean, se = batch_means(series, N_BATCHES)
    return MCEstimate(mean, se, int(series.size), rng.seed)


# --------------------------------------------------------------------------
# exponential decay
# --------------------------------------------------------------------------


def default_dictionary(params: ModelParams) -> list[TestFn]:
    """Four exponentials and four indicators on the scale ``a / b`` of the CIR mean."""
    m = params.a / params.b
    return [TestFn("exp", q / m) for q in (0.25, 0.5, 1.0, 2.0)] + [TestFn("indicator", y * m) for y in (0.5, 1.0, 2.0, 4.0)]


@dataclass
class DecayFit:
    times: np.ndarray
    distances: np.ndarray
    stderrs: np.ndarray
    used: np.ndarray
    rate: float
    rate_se: float
    prefactor: float
    r_squared: float
    outcome: str
    x0: float
    burn_in: float = 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return self.rate - 1.96 * self.rate_se, self.rate + 1.96 * self.rate_se

    def monotone(self, slack: float = 2.0) -> bool:
        """``d`` nonincreasing up to ``slack`` standard errors of the later point."""
        d, s = self.distances, self.stderrs
        return bool(np.all(d[1:] <= d[:-1] + slack * np.maximum(s[1:], s[:-1])))

    def agrees_with(self, other: "DecayFit") -> bool:
        lo1, hi1 = self.ci
        lo2, hi2 = other.ci
        return max(lo1, lo2) <= min(hi1, hi2)

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "distances": self.distances.tolist(),
            "stderrs": self.stderrs.tolist(),
            "used": self.used.tolist(),
            "rate": self.rate,
            "rate_se": self.rate_se,
            "prefactor": self.prefactor,
            "r_squared": self.r_squared,
            "outcome": self.outcome,
            "x0": self.x0,
            "burn_in": self.burn_in,
        }


def decay_distances(params: ModelParams, x0: float, time_grid, n: int, rng: RandomStream,
                    dictionary: list[TestFn] | None = None, law: StationaryLaw | None = None,
                    scheme: Scheme | None = None, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """``d(t) = max_f |E_x f(X_t) - pi(f)|`` and the standard error of the maximizing gap."""
    fns = dictionary or default_dictionary(params)
    if not all(f.bounded for f in fns):
        raise ValueError("the decay dictionary must contain bounded functions only")
    law = law or stationary_law(params)
    targets = law.expect_many(fns)
    times = np.asarray(time_grid, dtype=float)
    grid = times if times[0] == 0 else np.concatenate([[0.0], times])
    vals = sample_paths(params, grid, x0, n, rng, scheme, threads).values[:, -times.size:]
    d = np.empty(times.size)
    se = np.empty(times.size)
    for j in range(times.size):
        col = vals[:, j]
        gaps = np.empty(len(fns))
        errs = np.empty(len(fns))
        for i, f in enumerate(fns):
            fx = f(col)
            gaps[i] = abs(fx.mean() - targets[i])
            # a sample with no spread (e.g. no path below a threshold yet) still has resolution 1/n
            errs[i] = max(fx.std(ddof=1) / math.sqrt(fx.size), 1.0 / fx.size)
        k = int(np.argmax(gaps))
        d[j], se[j] = gaps[k], errs[k]
    return d, se


def fit_decay(times, d, se, x0: float = math.nan, burn_in: float = 0.0, resolution: float = 5.0) -> DecayFit:
    """Weighted least squares of ``log d`` on ``t`` over points with ``d > resolution * se``."""
    times = np.asarray(times, dtype=float)
    d = np.asarray(d, dtype=float)
    se = np.asarray(se, dtype=float)
    used = (times >= burn_in) & (d > resolution * se)
    if used.sum() < 2:
        # fast mixing: the gap is already inside the noise at the second resolved time
        first = times[times >= burn_in]
        lower = 0.0
        if used.sum() == 1 and first.size > 1:
            t1 = times[used][0]
            t_next = first[first > t1]
            if t_next.size:
                lower = math.log(d[used][0] / (resolution * max(se[times == t_next[0]][0], 1e-300))) / (t_next[0] - t1)
        return DecayFit(times, d, se, used, max(lower, 0.0), math.inf, math.nan, math.nan,
                        "decay below MC resolution", x0, burn_in)
    t = times[used]
    y = np.log(d[used])
    w = (d[used] / se[used]) ** 2  # 1 / var(log d) by the delta method
    tbar = np.sum(w * t) / np.sum(w)
    ybar = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (t - tbar) ** 2)
    slope = np.sum(w * (t - tbar) * (y - ybar)) / sxx
    intercept = ybar - slope * tbar
    resid = y - (intercept + slope * t)
    ss_tot = np.sum(w * (y - ybar) ** 2)
    r2 = 1.0 - np.sum(w * resid**2) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(times, d, se, used, float(-slope), float(math.sqrt(1.0 / sxx)), float(math.exp(intercept)),
                    float(r2), "fitted", x0, burn_in)


def forgetting_time(params: ModelParams, x0: float, margin: float = 4.0) -> float:
    """``(log(1 + x0 b / a) + margin) / b``: time for ``x0 e^{-bt}`` to fall to the level ``a / b``, plus slack."""
    return (math.log1p(x0 * params.b / params.a) + margin) / params.b


def decay_fit(params: ModelParams, x0: float, time_grid, n: int, rng: RandomStream,
              dictionary: list[TestFn] | None = None, law: StationaryLaw | None = None,
              burn_in: float | None = None, scheme: Scheme | None = None, threads: int = 1) -> DecayFit:
    """Exponential fit ``d(t) ~ B e^{-rate t}`` of the test-function distance to stationarity.

    ``burn_in`` defaults to ``forgetting_time(params, x0)``.
    """
    params.require_positive_a("decay fit")
    if not any(params.levy.tail_moment(k).finite for k in (0.01, 0.05, 0.1, 0.25, 0.5, 1.0)):
        raise DivergentTailError(0.01, "decay fit")
    burn = forgetting_time(params, x0) if burn_in is None else float(burn_in)
    d, se = decay_distances(params, x0, time_grid, n, rng, dictionary, law, scheme, threads)
    return fit_decay(time_grid, d, se, x0, burn)
