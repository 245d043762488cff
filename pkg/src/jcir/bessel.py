"""The Bessel distribution ``m_{alpha,beta}`` on the nonnegative reals.

``m_{alpha,beta}`` has an atom ``exp(-alpha)`` at zero and the density

    beta * exp(-alpha - beta x) * sqrt(alpha / (beta x)) * I_1(2 sqrt(alpha beta x))

on ``(0, inf)``.  Its characteristic function is ``exp(alpha u / (beta - u))``
for ``Re u <= 0``, which is also the transform of a Poisson(alpha) sum of
independent rate-beta exponentials; the sampler uses that representation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .rng import as_generator, poisson

_MOMENT_RTOL = 1e-15


@dataclass(frozen=True)
class BesselParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Bessel parameters must be positive, got alpha={self.alpha}, beta={self.beta}")

    @classmethod
    def from_jump(cls, z: float, s: float, b: float, sigma: float) -> "BesselParams":
        """Law at time ``s`` of a jump of size ``z`` evolving as a CIR with zero drift level."""
        return cls(*jump_bessel_params(z, s, b, sigma))


def jump_bessel_params(z, s, b: float, sigma: float):
    """``alpha(z, s) = 2bz / (sigma^2 (e^{bs} - 1))`` and ``beta(z, s) = e^{bs} alpha / z``."""
    z = np.asarray(z, dtype=float)
    s = np.asarray(s, dtype=float)
    denom = sigma**2 * np.expm1(b * s)
    alpha = 2.0 * b * z / denom
    beta = 2.0 * b * np.exp(b * s) / denom
    return alpha, beta


def _i1_scaled_series(y: np.ndarray) -> np.ndarray:
    """Log of ``sum_k y^k / (k! (k+1)!)`` for ``y >= 0``.

    The sum equals ``I_1(2 sqrt(y)) / sqrt(y)``.  Terms are accumulated in log
    space around the dominant index so large ``y`` does not overflow.
    """
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    pos = y > 0
    if not pos.any():
        return out
    yp = y[pos]
    logy = np.log(yp)
    peak = np.sqrt(yp)
    # terms decay like exp(-(k - peak)^2 / peak) past the peak; 40 widths is far past 1e-16
    kmax = int(np.ceil(peak.max() + 40.0 * np.sqrt(peak.max() + 1.0) + 40.0))
    k = np.arange(kmax + 1)
    lg = np.array([math.lgamma(i + 1) + math.lgamma(i + 2) for i in k])
    log_terms = k[None, :] * logy[:, None] - lg[None, :]
    top = log_terms.max(axis=1)
    out[pos] = top + np.log(np.exp(log_terms - top[:, None]).sum(axis=1))
    return out


def bessel_pdf(p: BesselParams, x):
    """Atom mass ``exp(-alpha)`` and the absolutely continuous density at ``x >= 0``.

    At ``x = 0`` the density takes its right limit ``alpha beta exp(-alpha)``.
    """
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr < 0):
        raise ValueError("Bessel density is defined for x >= 0 only")
    a, b = p.alpha, p.beta
    # beta e^{-a-bx} sqrt(a/(bx)) I_1(2 sqrt(abx)) = a b e^{-a-bx} sum_k (abx)^k / (k!(k+1)!)
    log_sum = _i1_scaled_series(a * b * x_arr)
    dens = np.exp(math.log(a * b) - a - b * x_arr + log_sum)
    dens = float(dens) if np.ndim(x) == 0 else dens
    return math.exp(-a), dens


def bessel_chf(p: BesselParams, u):
    """``exp(alpha u / (beta - u))`` for ``Re u <= 0``."""
    u = np.asarray(u, dtype=complex)
    if np.any(u.real > 0):
        raise ValueError("characteristic function is evaluated on Re u <= 0 only")
    val = np.exp(p.alpha * u / (p.beta - u))
    return complex(val) if val.ndim == 0 else val


def _integer_moment(alpha: float, beta: float, n: int) -> float:
    """``e^{-alpha} beta^-n sum_k alpha^{k+1} (n+k)! / (k! (k+1)!)``.

    Summation runs past the peak of the terms (near ``k ~ alpha``) and stops
    once a term falls below ``1e-15`` of the running sum.
    """
    log_alpha = math.log(alpha)
    total = 0.0
    k = 0
    while True:
        log_term = (k + 1) * log_alpha + math.lgamma(n + k + 1) - math.lgamma(k + 1) - math.lgamma(k + 2) - alpha
        term = math.exp(log_term)
        total += term
        # term ratio alpha (n+k+1) / ((k+1)(k+2)) < 1 beyond the peak
        past_peak = alpha * (n + k + 1) < (k + 1) * (k + 2)
        if past_peak and term < _MOMENT_RTOL * total:
            break
        k += 1
    return total / beta**n


def _fractional_moment(alpha: float, beta: float, kappa: float) -> float:
    """Quadrature of ``y^kappa`` against ``m_{alpha,1}`` then rescaled by ``beta^-kappa``."""
    p1 = BesselParams(alpha, 1.0)
    # the continuous part is a Poisson mixture of Gamma(n, 1) laws; beyond
    # alpha + 40 sqrt(2 alpha + 1) + 60 the Gamma tails are below 1e-14
    y_max = alpha + 40.0 * math.sqrt(2.0 * alpha + 1.0) + 60.0
    f = lambda y: y**kappa * bessel_pdf(p1, y)[1]
    pts = sorted({min(alpha, y_max / 2), 1.0})
    val, _ = integrate.quad(f, 0.0, y_max, points=pts, epsabs=0.0, epsrel=1e-12, limit=500)
    return val / beta**kappa


def bessel_moment(p: BesselParams, kappa: float) -> float:
    """``int x^kappa m_{alpha,beta}(dx)``; series for integer ``kappa``, quadrature otherwise."""
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    if kappa == 1:
        return p.alpha / p.beta
    if float(kappa).is_integer():
        return _integer_moment(p.alpha, p.beta, int(kappa))
    return _fractional_moment(p.alpha, p.beta, kappa)


def bessel_sample(p, rng, size: int | None = None):
    """Exact draw: Poisson(alpha) many rate-beta exponentials, summed.

    ``p`` may also be a pair of broadcastable ``(alpha, beta)`` arrays, in
    which case one draw is produced per element.
    """
    gen = as_generator(rng)
    if isinstance(p, BesselParams):
        alpha, beta = p.alpha, p.beta
        shape = () if size is None else (size,)
        alpha = np.full(shape, alpha)
        beta = np.full(shape, beta)
    else:
        alpha, beta = np.broadcast_arrays(*map(np.asarray, p))
    out = _compound_gamma(alpha, beta, gen)
    return float(out) if np.ndim(out) == 0 else out


def _compound_gamma(alpha: np.ndarray, beta: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    n = poisson(gen, alpha)
    out = np.zeros(np.shape(alpha))
    hit = n > 0
    if np.any(hit):
        out[hit] = gen.gamma(n[hit], 1.0 / beta[hit])
    return out


@dataclass
class BesselMomentBoundReport:
    kappa: float
    delta: float
    grid: list[tuple[float, float]]
    upper_ratio_sup: float
    lower_ratio_inf: float
    upper_ratios: list[float] = field(default_factory=list)
    lower_ratios: list[float] = field(default_factory=list)

    @property
    def c1(self) -> float:
        """Smallest constant consistent with the scanned points for the upper bound."""
        return self.upper_ratio_sup

    @property
    def c2(self) -> float:
        return self.lower_ratio_inf

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "delta": self.delta,
            "grid": [list(g) for g in self.grid],
            "upper_ratio_sup": self.upper_ratio_sup,
            "lower_ratio_inf": self.lower_ratio_inf,
            "C1": self.c1,
            "C2": self.c2,
            "upper_ratios": self.upper_ratios,
            "lower_ratios": self.lower_ratios,
        }


def moment_bound_scan(kappa: float, delta: float, grid) -> BesselMomentBoundReport:
    """Scan the moment ratios that bound ``int x^kappa dm_{alpha,beta}``.

    Upper ratio ``moment * beta^k / (1 + alpha^k)`` over the whole grid and
    lower ratio ``moment * beta^k / alpha^k`` over points with ``alpha >= delta``.
    """
    grid = [(float(a), float(b)) for a, b in grid]
    if not grid:
        raise ValueError("empty (alpha, beta) grid")
    if not delta > 0:
        raise ValueError("delta must be positive")
    upper, lower = [], []
    for a, b in grid:
        m = bessel_moment(BesselParams(a, b), kappa)
        upper.append(m * b**kappa / (1.0 + a**kappa))
        if a >= delta:
            lower.append(m * b**kappa / a**kappa)
    if not lower:
        raise ValueError(f"no grid point has alpha >= delta = {delta}")
    return BesselMomentBoundReport(kappa, delta, grid, max(upper), min(lower), upper, lower)
