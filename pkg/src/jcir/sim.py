"""Samplers for the JCIR process.

* ``cir_exact``: exact CIR transition (Poisson-mixed Gamma, i.e. scaled
  noncentral chi-square).
* ``jcir_exact_oneshot``: exact law of ``X_t`` for finite-activity jumps;
  each jump of size ``z`` and age ``s`` contributes an independent Bessel
  variable with parameters ``alpha(z, s), beta(z, s)``.
* ``jcir_exact_path``: exact event-driven paths (CIR between jumps).
* ``euler_path``: full-truncation Euler scheme for any admissible measure.

All samplers are vectorized over independent replicas; pass ``size``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bessel import BesselParams, jump_bessel_params
from .chf import ModelParams
from .levy import Zero
from .rng import RandomStream, as_generator, poisson, run_chunked


@dataclass(frozen=True)
class Scheme:
    """``kind`` is ``"exact"`` or ``"euler"``; ``dt`` and ``eps`` apply to Euler only."""

    kind: str = "exact"
    dt: float | None = None
    eps: float | None = None
    compensate: bool = True

    def __post_init__(self):
        if self.kind not in ("exact", "euler"):
            raise ValueError(f"scheme kind must be 'exact' or 'euler', got {self.kind!r}")
        if self.kind == "euler":
            if self.dt is None or not self.dt > 0:
                raise ValueError(f"Euler scheme needs dt > 0, got {self.dt}")
            if self.eps is None or not self.eps > 0:
                raise ValueError(f"Euler scheme needs eps > 0, got {self.eps}")

    def to_dict(self) -> dict:
        if self.kind == "exact":
            return {"kind": "exact"}
        return {"kind": "euler", "dt": self.dt, "eps": self.eps, "compensate": self.compensate}


@dataclass
class Path:
    """Values on ``times`` for one path (1-d ``values``) or a batch (rows are paths)."""

    times: np.ndarray
    values: np.ndarray
    scheme: Scheme = field(default_factory=Scheme)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("path times must start at 0 and increase strictly")
        if self.values.shape[-1] != self.times.size:
            raise ValueError("values and times have different lengths")
        if np.any(self.values < 0):
            raise ValueError("path left the nonnegative half line")

    @property
    def n_paths(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    def at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.times, t))
        if k == self.times.size or not math.isclose(self.times[k], t, rel_tol=1e-12, abs_tol=1e-12):
            raise KeyError(f"time {t} is not on the path grid")
        return self.values[..., k]


@dataclass(frozen=True)
class JumpContribution:
    """A jump at time ``tau`` of size ``z``, seen at horizon ``t``; its current law is ``bessel``."""

    tau: float
    z: float
    bessel: BesselParams


def _time_grid(grid_times) -> np.ndarray:
    g = np.asarray(grid_times, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("grid_times must be a nonempty 1-d sequence")
    if g[0] != 0.0:
        g = np.concatenate([[0.0], g])
    if g[0] < 0 or np.any(np.diff(g) <= 0):
        raise ValueError("grid_times must be nonnegative and strictly increasing")
    return g


def _require_finite_activity(params: ModelParams, what: str) -> float:
    if not params.levy.finite_activity:
        raise ValueError(f"{what} needs a finite-activity Lévy measure; use euler_path instead")
    return params.levy.total_mass()


# --------------------------------------------------------------------------
# CIR
# --------------------------------------------------------------------------


def _cir_step(params: ModelParams, dt, x, gen: np.random.Generator) -> np.ndarray:
    """Exact CIR transition over ``dt`` (array or scalar) from ``x`` (array)."""
    dt = np.broadcast_to(np.asarray(dt, dtype=float), np.shape(x))
    x = np.asarray(x, dtype=float)
    out = x.copy()
    move = dt > 0
    if not move.any():
        return out
    b, s2 = params.b, params.sigma**2
    h = dt[move]
    c = s2 * (-np.expm1(-b * h)) / (4.0 * b)
    lam = x[move] * np.exp(-b * h) / c
    shape = 2.0 * params.a / s2 + poisson(gen, lam / 2.0)
    draw = np.zeros(h.shape)
    pos = shape > 0
    draw[pos] = gen.gamma(shape[pos], 2.0)
    out[move] = c * draw
    return out


def cir_exact(params: ModelParams, t, x0, rng, size: int | None = None):
    """Exact draws of the CIR part (jumps ignored) at time ``t > 0`` from ``x0``.

    ``t`` and ``x0`` broadcast; ``size`` adds independent replicas.
    """
    if np.any(np.asarray(t) <= 0):
        raise ValueError("t must be positive")
    if np.any(np.asarray(x0) < 0):
        raise ValueError("x0 must be nonnegative")
    gen = as_generator(rng)
    shape = np.broadcast_shapes(np.shape(t), np.shape(x0)) if size is None else (size,)
    x = np.broadcast_to(np.asarray(x0, dtype=float), shape)
    out = _cir_step(params, np.broadcast_to(t, shape), x, gen)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# exact JCIR marginal
# --------------------------------------------------------------------------


def _bessel_aggregate(params: ModelParams, ages: np.ndarray, sizes: np.ndarray, gen) -> np.ndarray:
    """One Bessel draw per (age, size); age 0 returns the jump itself."""
    out = sizes.astype(float).copy()
    old = ages > 0
    if old.any():
        alpha, beta = jump_bessel_params(sizes[old], ages[old], params.b, params.sigma)
        n = poisson(gen, alpha)
        draw = np.zeros(alpha.shape)
        hit = n > 0
        draw[hit] = gen.gamma(n[hit], 1.0 / beta[hit])
        out[old] = draw
    return out


def z_exact(params: ModelParams, t: float, rng, size: int | None = None):
    """Exact draws of the jump-driven part ``Z_t`` (zero initial value, ``a = 0``)."""
    rate = _require_finite_activity(params, "exact Z sampling")
    gen = as_generator(rng)
    m = 1 if size is None else size
    out = np.zeros(m)
    if rate > 0:
        k = gen.poisson(rate * t, size=m)
        total = int(k.sum())
        if total:
            owner = np.repeat(np.arange(m), k)
            ages = t * gen.uniform(size=total)  # t - tau with tau uniform on (0, t]
            sizes = params.levy.sample_jumps(gen, total)
            np.add.at(out, owner, _bessel_aggregate(params, ages, sizes, gen))
    return float(out[0]) if size is None else out


def jcir_exact_oneshot(params: ModelParams, t: float, x0: float, rng, size: int | None = None):
    """Exact draws of ``X_t`` from ``x0`` as CIR part plus independent jump aggregate."""
    if not t > 0:
        raise ValueError("t must be positive")
    _require_finite_activity(params, "jcir_exact_oneshot")
    gen = as_generator(rng)
    m = 1 if size is None else size
    y = _cir_step(params, t, np.full(m, float(x0)), gen)
    z = z_exact(params, t, gen, m)
    out = y + z
    return float(out[0]) if size is None else out


def jump_contributions(params: ModelParams, t: float, rng) -> list[JumpContribution]:
    """The jumps of one realization on ``(0, t]`` with their Bessel laws at ``t``."""
    rate = _require_finite_activity(params, "jump_contributions")
    gen = as_generator(rng)
    if rate == 0:
        return []
    k = int(gen.poisson(rate * t))
    taus = np.sort(t * (1.0 - gen.uniform(size=k)))
    sizes = params.levy.sample_jumps(gen, k)
    out = []
    for tau, z in zip(taus, sizes):
        s = t - tau
        if s > 0:
            out.append(JumpContribution(float(tau), float(z), BesselParams.from_jump(z, s, params.b, params.sigma)))
    return out


# --------------------------------------------------------------------------
# exact event-driven paths
# --------------------------------------------------------------------------


def _exact_path_block(params: ModelParams, grid: np.ndarray, x0: float, gen, m: int) -> np.ndarray:
    rate = params.levy.total_mass() if not isinstance(params.levy, Zero) else 0.0
    vals = np.empty((m, grid.size))
    x = np.full(m, float(x0))
    vals[:, 0] = x
    for k in range(1, grid.size):
        h = grid[k] - grid[k - 1]
        if rate > 0:
            counts = gen.poisson(rate * h, size=m)
            depth = int(counts.max())
        else:
            depth = 0
        if depth:
            # per path, jump epochs sorted within the interval; unused slots are +inf
            offsets = np.sort(np.where(np.arange(depth)[None, :] < counts[:, None],
                                       h * (1.0 - gen.uniform(size=(m, depth))), np.inf), axis=1)
            clock = np.zeros(m)
            for j in range(depth):
                live = counts > j
                idx = np.flatnonzero(live)
                epoch = offsets[idx, j]
                x[idx] = _cir_step(params, epoch - clock[idx], x[idx], gen)
                x[idx] += params.levy.sample_jumps(gen, idx.size)
                clock[idx] = epoch
            x = _cir_step(params, h - clock, x, gen)
        else:
            x = _cir_step(params, h, x, gen)
        vals[:, k] = x
    return vals


def jcir_exact_path(params: ModelParams, grid_times, x0: float, rng, size: int | None = None) -> Path:
    """Exact paths on ``grid_times``: Poisson jump epochs, exact CIR in between."""
    _require_finite_activity(params, "jcir_exact_path")
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    grid = _time_grid(grid_times)
    gen = as_generator(rng)
    vals = _exact_path_block(params, grid, x0, gen, 1 if size is None else size)
    return Path(grid, vals[0] if size is None else vals, Scheme("exact"))


# --------------------------------------------------------------------------
# Euler full truncation
# --------------------------------------------------------------------------


def _euler_block(params: ModelParams, grid: np.ndarray, x0: float, dt: float, eps: float,
                 compensate: bool, gen, m: int) -> np.ndarray:
    levy = params.levy
    big_rate = 0.0 if isinstance(levy, Zero) else levy.mass_above(eps)
    drift_extra = levy.mean_below(eps) if (compensate and not isinstance(levy, Zero)) else 0.0
    steps = np.rint(grid / dt).astype(np.int64)
    vals = np.empty((m, grid.size))
    x = np.full(m, float(x0))
    vals[:, 0] = x
    sq = math.sqrt(dt)
    a, b, sig = params.a + drift_extra, params.b, params.sigma
    col = 1
    for n in range(1, int(steps[-1]) + 1):
        inc = (a - b * x) * dt + sig * np.sqrt(x) * sq * gen.standard_normal(m)
        if big_rate > 0:
            counts = gen.poisson(big_rate * dt, size=m)
            total = int(counts.sum())
            if total:
                jumps = np.zeros(m)
                np.add.at(jumps, np.repeat(np.arange(m), counts), levy.sample_above(eps, gen, total))
                inc += jumps
        x = np.maximum(x + inc, 0.0)
        if n == steps[col]:
            vals[:, col] = x
            col += 1
    return vals


def euler_path(params: ModelParams, dt: float, eps: float, grid_times, x0: float, rng,
               size: int | None = None, compensate: bool = True) -> Path:
    """Full-truncation Euler paths.

    Jumps above ``eps`` are simulated exactly as compound Poisson with rate
    ``nu((eps, inf))``; jumps at or below ``eps`` are replaced by their mean
    ``int_{z <= eps} z nu(dz) dt`` when ``compensate`` is set, else dropped.
    ``grid_times`` must be multiples of ``dt``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not 0 < eps <= 1:
        raise ValueError("jump truncation eps must lie in (0, 1]")
    if x0 < 0:
        raise ValueError("x0 must be nonnegative")
    grid = _time_grid(grid_times)
    ratio = grid / dt
    if np.any(np.abs(ratio - np.rint(ratio)) > 1e-9 * np.maximum(1.0, ratio)):
        raise ValueError("grid_times must be integer multiples of dt")
    gen = as_generator(rng)
    vals = _euler_block(params, grid, x0, dt, eps, compensate, gen, 1 if size is None else size)
    return Path(grid, vals[0] if size is None else vals, Scheme("euler", dt, eps, compensate))


def euler_coupled_cir(params: ModelParams, t: float, x0: float, dts, rng, size: int) -> dict[float, np.ndarray]:
    """Euler marginals of the CIR part at ``t`` for several ``dt`` driven by one Brownian path.

    Every ``dt`` must be an integer multiple of the finest one; coarse
    increments are sums of fine ones, so the schemes differ only by
    discretization, not by sampling noise.
    """
    dts = sorted(float(d) for d in dts)
    fine = dts[0]
    n_fine = int(round(t / fine))
    if not math.isclose(n_fine * fine, t, rel_tol=1e-9):
        raise ValueError("t must be a multiple of the finest dt")
    ratios = [int(round(d / fine)) for d in dts]
    if any(not math.isclose(r * fine, d, rel_tol=1e-9) for r, d in zip(ratios, dts)):
        raise ValueError("every dt must be a multiple of the finest dt")
    gen = as_generator(rng)
    xs = {d: np.full(size, float(x0)) for d in dts}
    acc = {d: np.zeros(size) for d in dts}
    sq = math.sqrt(fine)
    for n in range(1, n_fine + 1):
        dw = sq * gen.standard_normal(size)
        for d, r in zip(dts, ratios):
            acc[d] += dw
            if n % r == 0:
                x = xs[d]
                xs[d] = np.maximum(x + (params.a - params.b * x) * d + params.sigma * np.sqrt(x) * acc[d], 0.0)
                acc[d][:] = 0.0
    return xs


# --------------------------------------------------------------------------
# chunked drivers
# --------------------------------------------------------------------------


def sample_marginal(params: ModelParams, t: float, x0: float, n: int, stream: RandomStream,
                    scheme: Scheme | None = None, threads: int = 1) -> np.ndarray:
    """``n`` draws of ``X_t``; exact when the measure allows it, Euler otherwise."""
    scheme = scheme or default_scheme(params)
    if scheme.kind == "exact":
        draw = lambda gen, m: jcir_exact_oneshot(params, t, x0, gen, m)
    else:
        grid = np.array([0.0, t])
        draw = lambda gen, m: _euler_block(params, grid, x0, scheme.dt, scheme.eps, scheme.compensate, gen, m)[:, -1]
    return run_chunked(draw, n, stream, threads)


def sample_paths(params: ModelParams, grid_times, x0: float, n: int, stream: RandomStream,
                 scheme: Scheme | None = None, threads: int = 1) -> Path:
    scheme = scheme or default_scheme(params)
    grid = _time_grid(grid_times)
    if scheme.kind == "exact":
        _require_finite_activity(params, "exact paths")
        draw = lambda gen, m: _exact_path_block(params, grid, x0, gen, m)
    else:
        draw = lambda gen, m: euler_path(params, scheme.dt, scheme.eps, grid, x0, gen, m, scheme.compensate).values
    return Path(grid, run_chunked(draw, n, stream, threads), scheme)


def default_scheme(params: ModelParams, dt: float = 1e-3, eps: float = 1e-3) -> Scheme:
    if params.levy.finite_activity:
        return Scheme("exact")
    return Scheme("euler", dt, eps, True)
