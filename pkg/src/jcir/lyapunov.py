"""Generator of the JCIR process applied to Lyapunov functions, and drift checks.

``AV(x) = DV(x) + JV(x)`` with the diffusion part
``DV = (a - bx) V' + sigma^2 x V'' / 2`` and the jump part
``JV = int (V(x + z) - V(x)) nu(dz)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .chf import ModelParams
from .levy import CompoundPoisson, LevyModel, PointMass, Zero
from .rng import MCEstimate, RandomStream
from .sim import Scheme, sample_marginal, sample_paths


class DivergentTailError(ValueError):
    """A drift or moment experiment needs a tail moment that is infinite."""

    def __init__(self, kappa: float, what: str):
        self.kappa = kappa
        super().__init__(f"int_{{z>1}} z^kappa nu(dz) = inf for kappa = {kappa:g}; {what} refused")


def require_tail_moment(levy: LevyModel, kappa: float, what: str) -> None:
    if not levy.tail_moment(kappa).finite:
        raise DivergentTailError(kappa, what)


def require_log_tail(levy: LevyModel, what: str) -> None:
    if math.isinf(levy.log_tail()):
        raise ValueError(f"int_{{z>1}} log z nu(dz) = inf; {what} refused")


# --------------------------------------------------------------------------
# test functions
# --------------------------------------------------------------------------


class LyapunovFn:
    name = "base"

    def value(self, x):
        raise NotImplementedError

    def d1(self, x):
        raise NotImplementedError

    def d2(self, x):
        raise NotImplementedError

    def increment(self, x: float, z):
        """``V(x + z) - V(x)`` without cancellation."""
        return self.value(x + np.asarray(z, dtype=float)) - self.value(x)

    def to_dict(self) -> dict:
        return {"type": self.name}


@dataclass(frozen=True)
class Log(LyapunovFn):
    """``log(1 + x)``."""

    name = "log"

    def value(self, x):
        return np.log1p(x)

    def d1(self, x):
        return 1.0 / (1.0 + np.asarray(x, dtype=float))

    def d2(self, x):
        return -1.0 / (1.0 + np.asarray(x, dtype=float)) ** 2

    def increment(self, x, z):
        return np.log1p(np.asarray(z, dtype=float) / (1.0 + x))


@dataclass(frozen=True)
class Identity(LyapunovFn):
    name = "identity"

    def value(self, x):
        return np.asarray(x, dtype=float)

    def d1(self, x):
        return np.ones_like(np.asarray(x, dtype=float))

    def d2(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def increment(self, x, z):
        return np.asarray(z, dtype=float)


def bridge_coefficients(k: float) -> tuple[float, float, float]:
    """``(A, B, C)`` of ``A x^3 + B x^4 + C x^5``, matching ``x^k`` to second order at 1.

    The cubic leading term makes value, slope and curvature vanish at 0.
    """
    mat = np.array([[1.0, 1.0, 1.0], [3.0, 4.0, 5.0], [6.0, 12.0, 20.0]])
    rhs = np.array([1.0, k, k * (k - 1.0)])
    A, B, C = np.linalg.solve(mat, rhs)
    return float(A), float(B), float(C)


@dataclass(frozen=True)
class PowerKappa(LyapunovFn):
    """``x^k`` for ``x >= 1`` with ``k = min(kappa, 1)``; a quintic ``C^2`` bridge on ``[0, 1]``."""

    kappa: float
    name = "power"

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def k(self) -> float:
        return min(self.kappa, 1.0)

    def _pieces(self, x, outer, inner):
        x = np.asarray(x, dtype=float)
        hi = x >= 1.0
        out = np.where(hi, outer(np.where(hi, x, 1.0)), inner(np.where(hi, 0.0, x)))
        return float(out) if out.ndim == 0 else out

    def value(self, x):
        A, B, C = bridge_coefficients(self.k)
        k = self.k
        return self._pieces(x, lambda y: y**k, lambda y: y**3 * (A + y * (B + y * C)))

    def d1(self, x):
        A, B, C = bridge_coefficients(self.k)
        k = self.k
        return self._pieces(x, lambda y: k * y ** (k - 1.0), lambda y: y**2 * (3 * A + y * (4 * B + 5 * C * y)))

    def d2(self, x):
        A, B, C = bridge_coefficients(self.k)
        k = self.k
        return self._pieces(x, lambda y: k * (k - 1.0) * y ** (k - 2.0),
                            lambda y: y * (6 * A + y * (12 * B + 20 * C * y)))

    def increment(self, x, z):
        z = np.asarray(z, dtype=float)
        if x >= 1.0:
            return x**self.k * np.expm1(self.k * np.log1p(z / x))
        return self.value(x + z) - self.value(x)

    def to_dict(self) -> dict:
        return {"type": self.name, "kappa": self.kappa}


def lyapunov_from_dict(d: dict) -> LyapunovFn:
    kind = d.get("type")
    if kind == "log":
        return Log()
    if kind == "identity":
        return Identity()
    if kind == "power":
        return PowerKappa(float(d["kappa"]))
    raise ValueError(f"unknown Lyapunov function type {kind!r}")


# --------------------------------------------------------------------------
# generator
# --------------------------------------------------------------------------


def diffusion_part(params: ModelParams, fn: LyapunovFn, x):
    x = np.asarray(x, dtype=float)
    return (params.a - params.b * x) * fn.d1(x) + 0.5 * params.sigma**2 * x * fn.d2(x)


def jump_part(params: ModelParams, fn: LyapunovFn, x: float) -> float:
    """``int (V(x+z) - V(x)) nu(dz)``, split at ``z = 1`` and at the scale of ``x``."""
    levy = params.levy
    if isinstance(levy, Zero):
        return 0.0
    if isinstance(levy, CompoundPoisson) and isinstance(levy.jump, PointMass):
        return levy.rate * float(fn.increment(x, levy.jump.z0))
    f = lambda z: float(fn.increment(x, z))
    # the increment changes character near z ~ 1 + x; give quadrature that breakpoint
    knee = max(2.0, 2.0 * (1.0 + x))
    return levy.integrate(f, 0.0, 1.0) + levy.integrate(f, 1.0, knee) + levy.integrate(f, knee, math.inf)


def apply_generator(params: ModelParams, fn: LyapunovFn, x):
    """``AV(x)`` for scalar or array ``x >= 0``."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0):
        raise ValueError("the generator acts on x >= 0")
    dv = diffusion_part(params, fn, xs)
    jv = np.vectorize(lambda v: jump_part(params, fn, float(v)), otypes=[float])(xs)
    out = dv + jv
    return float(out) if out.ndim == 0 else out


def generator_table(params: ModelParams, fn: LyapunovFn, grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(dv, jv, av)`` on ``grid``."""
    xs = np.asarray(grid, dtype=float)
    dv = np.asarray(diffusion_part(params, fn, xs), dtype=float)
    jv = np.array([jump_part(params, fn, float(v)) for v in xs])
    return dv, jv, dv + jv


# --------------------------------------------------------------------------
# drift checks
# --------------------------------------------------------------------------


@dataclass
class DriftReport:
    fn: LyapunovFn
    condition: str
    grid: np.ndarray
    dv: np.ndarray
    jv: np.ndarray
    av_values: np.ndarray
    c: float
    M: float
    satisfied: bool
    worst_margin: float
    K: float | None = None
    analytic_bound: float | None = None
    c_max: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fn": self.fn.to_dict(),
            "condition": self.condition,
            "c": self.c,
            "M": self.M,
            "K": self.K,
            "satisfied": bool(self.satisfied),
            "worst_margin": self.worst_margin,
            "analytic_bound": self.analytic_bound,
            "c_max": self.c_max,
            "max_abs_av": float(np.max(np.abs(self.av_values))),
            "grid_size": int(self.grid.size),
            "notes": list(self.notes),
        }


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 3:
        raise ValueError("drift grid needs at least three points")
    if np.any(g < 0) or np.any(np.diff(g) <= 0):
        raise ValueError("drift grid must be nonnegative and strictly increasing")
    return g


def _worst(margin: np.ndarray, M: float, c: float) -> float:
    # margins that vanish in exact arithmetic come out as -1e-16; report them as 0
    worst = float(margin.min())
    return 0.0 if -1e-12 * max(1.0, abs(M), abs(c)) <= worst < 0 else worst


def log_generator_bound(params: ModelParams) -> float:
    """Bound on ``|AV|`` for ``V = log(1 + x)`` over all ``x >= 0``.

    ``|(a - bx)/(1+x)| <= max(a, b)``, ``sigma^2 x / (2 (1+x)^2) <= sigma^2 / 8`` and
    ``0 <= JV <= int_{z<=1} z nu + log 2 nu(z>1) + int_{z>1} log z nu``.
    """
    levy = params.levy
    jump = 0.0
    if not isinstance(levy, Zero):
        jump = levy.mean_below(1.0) + math.log(2.0) * levy.mass_above(1.0) + levy.log_tail()
    return max(params.a, params.b) + params.sigma**2 / 8.0 + jump


def check_log_drift(params: ModelParams, grid, K: float | None = None, c: float | None = None) -> DriftReport:
    """Check ``AV <= -c + M 1_K`` for ``V = log(1 + x)`` and ``K = [0, K]`` on ``grid``.

    ``c`` defaults to ``b / 2``.  Without ``K`` the compact set ends at the
    first grid point beyond which every grid value satisfies ``AV < -c``.
    """
    require_log_tail(params.levy, "log drift check")
    params.require_positive_a("log drift check")
    g = _check_grid(grid)
    c = params.b / 2.0 if c is None else float(c)
    notes = []
    dv, jv, av = generator_table(params, Log(), g)
    if K is None:
        bad = np.flatnonzero(av >= -c)
        K = float(g[bad[-1]]) if bad.size else float(g[0])
        notes.append("K ends at the last grid point with AV >= -c")
        if bad.size and bad[-1] == g.size - 1:
            notes.append("AV >= -c at the last grid point: grid too short for the drift to show")
    else:
        if K < g[0] or K >= g[-1]:
            raise ValueError(f"grid [{g[0]}, {g[-1]}] does not cover K = [0, {K}] with points beyond it")
    inside = g <= K
    M = max(0.0, float(np.max(av[inside] + c))) if inside.any() else 0.0
    margin = -c + M * inside - av
    outside_ok = bool(np.all(av[~inside] <= -c)) and (~inside).any()
    worst = _worst(margin, M, c)
    return DriftReport(Log(), "log-form", g, dv, jv, av, c, M, outside_ok and worst >= 0, worst, K=K, analytic_bound=log_generator_bound(params), notes=notes)


def check_power_drift(params: ModelParams, kappa: float, grid, c: float | None = None) -> DriftReport:
    """Check ``AV <= -c V + M`` for ``V = PowerKappa(kappa)`` on ``grid``.

    ``c`` defaults to ``b min(kappa, 1) / 2``; ``M`` is the smallest value that
    works on the grid.  The check is satisfied when, in addition, ``AV + cV``
    is nonincreasing over the last quarter of the grid, so the bound is not an
    artefact of stopping the grid early.  ``c_max`` is the largest ``c`` on a
    ladder in ``(0, b min(kappa, 1)]`` that passes the same test.
    """
    require_tail_moment(params.levy, kappa, "power drift check")
    g = _check_grid(grid)
    fn = PowerKappa(kappa)
    rate = params.b * fn.k
    c = rate / 2.0 if c is None else float(c)
    if not 0 < c <= rate:
        raise ValueError(f"c must lie in (0, {rate:g}]")
    dv, jv, av = generator_table(params, fn, g)
    V = np.asarray(fn.value(g), dtype=float)
    tail = slice(int(0.75 * g.size), None)

    def passes(cc: float) -> bool:
        h = av + cc * V
        return bool(np.all(np.diff(h[tail]) <= 1e-12 * np.maximum(1.0, np.abs(h[tail][1:]))))

    ladder = [rate * j / 20.0 for j in range(20, 0, -1)]
    c_max = next((cc for cc in ladder if passes(cc)), None)
    M = max(0.0, float(np.max(av + c * V)))
    margin = -c * V + M - av
    notes = []
    if c_max is None:
        notes.append("no c on the ladder gave a decreasing tail for AV + cV")
    worst = _worst(margin, M, c)
    return DriftReport(fn, "power-form", g, dv, jv, av, c, M, passes(c) and worst >= 0, worst, c_max=c_max, notes=notes)


# --------------------------------------------------------------------------
# Monte Carlo checks
# --------------------------------------------------------------------------


def generator_interpolant(params: ModelParams, fn: LyapunovFn, x_max: float, nodes: int = 160):
    """``AV`` as a callable on ``[0, x_max]``: exact ``DV`` plus a spline of ``JV``.

    ``JV`` is smooth in ``x``; it is tabulated on a grid uniform in
    ``log(1 + x)`` and interpolated there.  Returns ``(callable, err)`` where
    ``err`` is the largest spline error observed at the cell midpoints.
    """
    s = np.linspace(0.0, math.log1p(x_max), nodes)
    xs = np.expm1(s)
    jv = np.array([jump_part(params, fn, float(v)) for v in xs])
    spline = CubicSpline(s, jv)
    mid = 0.5 * (s[1:] + s[:-1])
    err = float(np.max(np.abs(spline(mid) - [jump_part(params, fn, float(v)) for v in np.expm1(mid)])))

    def av(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(diffusion_part(params, fn, x), dtype=float) + spline(np.log1p(x))

    return av, err


@dataclass
class DynkinReport:
    """Two independent estimates of ``E_x V(X_t) - V(x)`` and whether they agree within ``n_se`` combined SE."""

    lhs: MCEstimate
    rhs: MCEstimate
    interpolation_error: float
    n_se: float

    @property
    def gap(self) -> float:
        return self.lhs.mean - self.rhs.mean

    @property
    def combined_se(self) -> float:
        return math.hypot(self.lhs.stderr, self.rhs.stderr)

    @property
    def passed(self) -> bool:
        return abs(self.gap) <= self.n_se * self.combined_se + self.interpolation_error

    def to_dict(self) -> dict:
        return {"lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(), "gap": self.gap,
                "combined_se": self.combined_se, "interpolation_error": self.interpolation_error,
                "passed": self.passed}


def dynkin_check(params: ModelParams, fn: LyapunovFn, t: float, x0: float, n: int, stream: RandomStream,
                 n_s: int = 20, n_se: float = 3.0, threads: int = 1) -> DynkinReport:
    """Compare ``E_x V(X_t) - V(x)`` with the time integral of ``E_x AV(X_s)``.

    The left side uses terminal values from one set of exact paths; the right
    side applies the trapezoid rule on ``n_s`` equally spaced times to ``AV``
    along a second, independent set.
    """
    if not params.levy.finite_activity:
        raise ValueError("the generator check samples exact paths and needs a finite-activity jump measure")
    grid = np.linspace(0.0, t, n_s)
    left = sample_paths(params, [0.0, t], x0, n, stream.substream(0), Scheme("exact"), threads)
    right = sample_paths(params, grid, x0, n, stream.substream(1), Scheme("exact"), threads)
    av, err = generator_interpolant(params, fn, float(right.values.max()) * 1.01 + 1.0)
    lhs = np.asarray(fn.value(left.values[:, -1]), dtype=float) - float(fn.value(x0))
    vals = av(right.values)
    rhs = integrate.trapezoid(vals, grid, axis=1)
    return DynkinReport(MCEstimate.from_samples(lhs, stream.seed), MCEstimate.from_samples(rhs, stream.seed),
                        err * t, n_se)


def drift_transfer_check(params: ModelParams, report: DriftReport, xs, ts, n: int, stream: RandomStream,
                         n_se: float = 3.0, threads: int = 1) -> list[dict]:
    """MC test of ``E_x V(X_t) <= e^{-ct} V(x) + M / c`` for the ``(c, M)`` of a power-form report."""
    if report.condition != "power-form":
        raise ValueError("drift transfer needs a power-form report")
    fn, c, M = report.fn, report.c, report.M
    rows = []
    for i, x in enumerate(xs):
        for j, t in enumerate(ts):
            vals = np.asarray(fn.value(sample_marginal(params, float(t), float(x), n,
                                                       stream.substream(i * len(ts) + j), threads=threads)))
            est = MCEstimate.from_samples(vals, stream.seed)
            bound = math.exp(-c * t) * float(fn.value(float(x))) + M / c
            rows.append({"x": float(x), "t": float(t), "estimate": est.mean, "stderr": est.stderr,
                         "bound": bound, "passed": est.mean <= bound + n_se * est.stderr})
    return rows
