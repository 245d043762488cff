"""Lévy measures of the jump subordinator.

A ``LevyModel`` is a measure ``nu`` on ``(0, inf)`` with
``int (z ^ 1) nu(dz) < inf``.  Each variant knows its tail functionals in
closed form, so divergence (``+inf``) is an analytic answer and never the
result of a quadrature failing.

Shipped variants
----------------
``CompoundPoisson(rate, jump)``
    ``nu = rate * jump_law`` with ``jump`` one of ``PointMass``,
    ``Exponential`` or ``Pareto``.
``GammaDensity(c, lam)``
    ``nu(dz) = c z^-1 exp(-lam z) dz`` (infinite activity).
``ParetoTail(a)``
    ``nu(dz) = a z^(-a-1) 1{z > 1} dz`` (unit mass, heavy tail).
``Zero()``
    No jumps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import integrate, special

from ._special import pareto_laplace_gap

QUAD_EPSREL = 1e-10
QUAD_EPSABS = 1e-14
QUAD_LIMIT = 500


def _quad(f: Callable[[float], float], lo: float, hi: float, points=None) -> float:
    """Adaptive Gauss-Kronrod on ``(lo, hi)``; ``hi`` may be ``inf``."""
    if hi <= lo:
        return 0.0
    if math.isinf(hi):
        # split so the infinite piece starts where the integrand is already smooth
        mid = max(lo, 1.0) if lo < 1.0 else lo
        head = _quad(f, lo, mid) if mid > lo else 0.0
        # z = mid e^u turns power tails into exponential ones
        def g(u: float) -> float:
            if u >= 700.0:
                return 0.0
            z = mid * math.exp(u)
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    v = f(z) * z
            except OverflowError:
                return 0.0
            # inf * 0 from light tails far out: the integrand is negligible there
            return float(v) if math.isfinite(v) else 0.0

        val, _ = integrate.quad(g, 0.0, np.inf, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT)
        return head + val
    if lo > 0 and hi / lo > 1e3 and not points:
        # wide ranges: one panel per two decades keeps QUADPACK's bisection local
        edges = np.geomspace(lo, hi, int(math.ceil(math.log10(hi / lo) / 2)) + 1)
        return sum(_quad(f, e0, e1, points=[]) for e0, e1 in zip(edges[:-1], edges[1:]))
    inner = [p for p in (points or []) if lo < p < hi]
    val, _ = integrate.quad(
        f, lo, hi, points=inner or None, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT
    )
    return val


@dataclass(frozen=True)
class TailReport:
    """Result of ``int_{z>1} z^kappa nu(dz)`` plus the log-tail integral."""

    kappa: float
    value: float
    log_value: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)


# --------------------------------------------------------------------------
# jump laws for compound Poisson measures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    z0: float

    def __post_init__(self):
        if not self.z0 > 0:
            raise ValueError(f"PointMass location must be positive, got {self.z0}")

    def sf(self, z: float) -> float:
        return 1.0 if z < self.z0 else 0.0

    def integrate(self, f, lo: float, hi: float) -> float:
        return float(f(self.z0)) if lo < self.z0 <= hi else 0.0

    def moment_above_one(self, kappa: float) -> float:
        return self.z0**kappa if self.z0 > 1 else 0.0

    def log_above_one(self) -> float:
        return math.log(self.z0) if self.z0 > 1 else 0.0

    def mean(self) -> float:
        return self.z0

    def mean_below(self, eps: float) -> float:
        return self.z0 if self.z0 <= eps else 0.0

    def mgf(self, w):
        return np.exp(self.z0 * np.asarray(w, dtype=complex))

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.z0)

    def sample_above(self, eps: float, gen: np.random.Generator, size: int) -> np.ndarray:
        if self.z0 <= eps:
            raise ValueError(f"point mass at {self.z0} has no mass above {eps}")
        return np.full(size, self.z0)

    def to_dict(self) -> dict:
        return {"type": "point_mass", "z0": self.z0}


@dataclass(frozen=True)
class Exponential:
    mean_size: float

    def __post_init__(self):
        if not self.mean_size > 0:
            raise ValueError(f"Exponential mean must be positive, got {self.mean_size}")

    def sf(self, z: float) -> float:
        return math.exp(-max(z, 0.0) / self.mean_size)

    def density(self, z):
        return np.exp(-z / self.mean_size) / self.mean_size

    def integrate(self, f, lo: float, hi: float) -> float:
        return _quad(lambda z: f(z) * self.density(z), max(lo, 0.0), hi, points=[self.mean_size])

    def moment_above_one(self, kappa: float) -> float:
        # m^k * Gamma(k+1, 1/m)
        m = self.mean_size
        return m**kappa * special.gamma(kappa + 1) * special.gammaincc(kappa + 1, 1.0 / m)

    def log_above_one(self) -> float:
        return float(special.exp1(1.0 / self.mean_size))

    def mean(self) -> float:
        return self.mean_size

    def mean_below(self, eps: float) -> float:
        m = self.mean_size
        return m * special.gammainc(2.0, eps / m)

    def mgf(self, w):
        return 1.0 / (1.0 - self.mean_size * np.asarray(w, dtype=complex))

    def sample(self, gen, size):
        return gen.exponential(self.mean_size, size)

    def sample_above(self, eps, gen, size):
        return eps + gen.exponential(self.mean_size, size)

    def to_dict(self) -> dict:
        return {"type": "exponential", "mean": self.mean_size}


@dataclass(frozen=True)
class Pareto:
    """Pareto law on ``(z_min, inf)`` with tail index ``tail_index``; ``z_min >= 1``."""

    tail_index: float
    z_min: float = 1.0

    def __post_init__(self):
        if not self.tail_index > 0:
            raise ValueError(f"Pareto tail index must be positive, got {self.tail_index}")
        if not self.z_min >= 1:
            raise ValueError(f"Pareto z_min must be >= 1, got {self.z_min}")

    def sf(self, z: float) -> float:
        return 1.0 if z <= self.z_min else (self.z_min / z) ** self.tail_index

    def density(self, z):
        a, zm = self.tail_index, self.z_min
        return np.where(z > zm, a * zm**a * np.power(np.maximum(z, zm), -a - 1.0), 0.0)

    def integrate(self, f, lo: float, hi: float) -> float:
        return _quad(lambda z: f(z) * float(self.density(z)), max(lo, self.z_min), hi)

    def moment_above_one(self, kappa: float) -> float:
        a = self.tail_index
        if kappa >= a:
            return math.inf
        return a * self.z_min**kappa / (a - kappa)

    def log_above_one(self) -> float:
        return math.log(self.z_min) + 1.0 / self.tail_index

    def mean(self) -> float:
        return self.moment_above_one(1.0)

    def mean_below(self, eps: float) -> float:
        if eps <= self.z_min:
            return 0.0
        a, zm = self.tail_index, self.z_min
        if a == 1.0:
            return zm * math.log(eps / zm)
        return a * zm**a * (eps ** (1.0 - a) - zm ** (1.0 - a)) / (1.0 - a)

    def mgf(self, w):
        w = np.asarray(w, dtype=complex)
        return 1.0 + pareto_laplace_gap(self.tail_index, -self.z_min * w)

    def sample(self, gen, size):
        return self.z_min * (1.0 - gen.uniform(size=size)) ** (-1.0 / self.tail_index)

    def sample_above(self, eps, gen, size):
        return max(eps, self.z_min) * (1.0 - gen.uniform(size=size)) ** (-1.0 / self.tail_index)

    def to_dict(self) -> dict:
        return {"type": "pareto", "tail_index": self.tail_index, "z_min": self.z_min}


JumpLaw = Union[PointMass, Exponential, Pareto]


def jump_law_from_dict(d: dict) -> JumpLaw:
    kind = d.get("type")
    if kind == "point_mass":
        return PointMass(float(d["z0"]))
    if kind == "exponential":
        return Exponential(float(d["mean"]))
    if kind == "pareto":
        return Pareto(float(d["tail_index"]), float(d.get("z_min", 1.0)))
    raise ValueError(f"unknown jump law type {kind!r}")


# --------------------------------------------------------------------------
# Lévy measures
# --------------------------------------------------------------------------


class LevyModel:
    """Common interface; subclasses fill in the analytic pieces."""

    finite_activity: bool = True

    def total_mass(self) -> float:
        return self.mass_above(0.0)

    def mass_above(self, eps: float) -> float:
        raise NotImplementedError

    def integrate(self, f: Callable[[float], float], lower: float = 0.0, upper: float = math.inf) -> float:
        """``int_{(lower, upper]} f(z) nu(dz)`` by closed form or quadrature."""
        raise NotImplementedError

    def tail_moment(self, kappa: float) -> TailReport:
        if not kappa > 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        return TailReport(kappa, float(self._moment_above_one(kappa)), float(self.log_tail()))

    def _moment_above_one(self, kappa: float) -> float:
        raise NotImplementedError

    def log_tail(self) -> float:
        raise NotImplementedError

    def first_moment(self) -> float:
        """``int z nu(dz)``; ``inf`` when the big jumps have no mean."""
        big = self._moment_above_one(1.0)
        if math.isinf(big):
            return math.inf
        return self.mean_below(1.0) + big

    def mean_below(self, eps: float) -> float:
        """``int_{z <= eps} z nu(dz)``."""
        raise NotImplementedError

    def moment(self, k: float) -> float:
        """``int z^k nu(dz)`` for ``k >= 1`` (the small jumps always integrate)."""
        if k < 1:
            raise ValueError("moment is defined here for k >= 1")
        big = self._moment_above_one(k)
        if math.isinf(big):
            return math.inf
        if k == 1:
            return self.first_moment()
        return self.integrate(lambda z: z**k, 0.0, 1.0) + big

    def laplace_exponent(self, w):
        """``int (exp(z w) - 1) nu(dz)`` for complex ``w`` with ``Re w <= 0``."""
        raise NotImplementedError

    def sample_above(self, eps: float, gen: np.random.Generator, size: int) -> np.ndarray:
        """Draws from ``nu`` restricted to ``(eps, inf)`` and normalized."""
        raise NotImplementedError

    def sample_jumps(self, gen: np.random.Generator, size: int) -> np.ndarray:
        """Draws from ``nu / nu(0, inf)``; finite activity only."""
        if not self.finite_activity:
            raise ValueError("infinite-activity measure has no normalized jump law")
        return self.sample_above(0.0, gen, size)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Zero(LevyModel):
    def mass_above(self, eps):
        return 0.0

    def integrate(self, f, lower=0.0, upper=math.inf):
        return 0.0

    def _moment_above_one(self, kappa):
        return 0.0

    def log_tail(self):
        return 0.0

    def mean_below(self, eps):
        return 0.0

    def laplace_exponent(self, w):
        return np.zeros(np.shape(w), dtype=complex)

    def sample_above(self, eps, gen, size):
        raise ValueError("the zero measure has no jumps to sample")

    def to_dict(self):
        return {"type": "zero"}


@dataclass(frozen=True)
class CompoundPoisson(LevyModel):
    rate: float
    jump: JumpLaw = field(default_factory=lambda: PointMass(1.0))

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"compound Poisson rate must be positive, got {self.rate}")

    def mass_above(self, eps):
        return self.rate * self.jump.sf(eps)

    def integrate(self, f, lower=0.0, upper=math.inf):
        return self.rate * self.jump.integrate(f, lower, upper)

    def _moment_above_one(self, kappa):
        return self.rate * self.jump.moment_above_one(kappa)

    def log_tail(self):
        return self.rate * self.jump.log_above_one()

    def first_moment(self):
        return self.rate * self.jump.mean()

    def mean_below(self, eps):
        return self.rate * self.jump.mean_below(eps)

    def laplace_exponent(self, w):
        return self.rate * (self.jump.mgf(w) - 1.0)

    def sample_above(self, eps, gen, size):
        return self.jump.sample_above(eps, gen, size) if eps > 0 else self.jump.sample(gen, size)

    def to_dict(self):
        return {"type": "compound_poisson", "rate": self.rate, "jump": self.jump.to_dict()}


@dataclass(frozen=True)
class GammaDensity(LevyModel):
    c: float
    lam: float
    finite_activity = False

    def __post_init__(self):
        if not (self.c > 0 and self.lam > 0):
            raise ValueError(f"GammaDensity needs c > 0 and lam > 0, got c={self.c}, lam={self.lam}")

    def density(self, z):
        return self.c * np.exp(-self.lam * z) / z

    def mass_above(self, eps):
        if eps <= 0:
            return math.inf
        return self.c * float(special.exp1(self.lam * eps))

    def integrate(self, f, lower=0.0, upper=math.inf):
        return _quad(lambda z: f(z) * self.density(z), lower, upper, points=[1.0, 1.0 / self.lam])

    def _moment_above_one(self, kappa):
        # c * lam^-k * Gamma(k, lam)
        return self.c * self.lam ** (-kappa) * special.gamma(kappa) * special.gammaincc(kappa, self.lam)

    def log_tail(self):
        return _quad(lambda z: math.log(z) * self.density(z), 1.0, math.inf)

    def first_moment(self):
        return self.c / self.lam

    def mean_below(self, eps):
        return self.c * (-math.expm1(-self.lam * eps)) / self.lam

    def laplace_exponent(self, w):
        # Frullani: int (e^{-(lam - w) z} - e^{-lam z}) / z dz = log(lam / (lam - w))
        return -self.c * np.log1p(-np.asarray(w, dtype=complex) / self.lam)

    def sample_above(self, eps, gen, size):
        if eps <= 0:
            raise ValueError("GammaDensity has infinite mass near zero; sample above eps > 0")
        return _gamma_density_tail(self.lam, eps, gen, size)

    def to_dict(self):
        return {"type": "gamma_density", "c": self.c, "lam": self.lam}


def _gamma_density_tail(lam: float, eps: float, gen: np.random.Generator, size: int) -> np.ndarray:
    """Rejection sampler for density ``∝ z^-1 e^{-lam z}`` on ``(eps, inf)``.

    Envelope: ``1/z`` (log-uniform proposal) on ``(eps, 1/lam]`` and
    ``lam e^{-lam z}`` beyond, both dominating the target there.
    """
    knee = max(eps, 1.0 / lam)
    w_body = math.log(knee / eps)
    # beyond the knee: target <= e^{-lam z} / knee
    w_tail = math.exp(-lam * knee) / (lam * knee)
    p_body = w_body / (w_body + w_tail)
    out = np.empty(size)
    filled = 0
    while filled < size:
        m = max(2 * (size - filled), 64)
        body = gen.uniform(size=m) < p_body
        z = np.where(
            body,
            eps * np.exp(w_body * gen.uniform(size=m)),
            knee + gen.exponential(1.0 / lam, size=m),
        )
        accept_p = np.where(body, np.exp(-lam * z), knee / z)
        keep = z[gen.uniform(size=m) < accept_p]
        take = min(keep.size, size - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
    return out


@dataclass(frozen=True)
class ParetoTail(LevyModel):
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"ParetoTail index must be positive, got {self.a}")

    def mass_above(self, eps):
        return 1.0 if eps <= 1.0 else eps ** (-self.a)

    def integrate(self, f, lower=0.0, upper=math.inf):
        a = self.a
        return _quad(lambda z: f(z) * a * z ** (-a - 1.0), max(lower, 1.0), upper)

    def _moment_above_one(self, kappa):
        if kappa >= self.a:
            return math.inf
        return self.a / (self.a - kappa)

    def log_tail(self):
        return 1.0 / self.a

    def first_moment(self):
        return self._moment_above_one(1.0)

    def mean_below(self, eps):
        return Pareto(self.a).mean_below(eps)

    def laplace_exponent(self, w):
        return pareto_laplace_gap(self.a, -np.asarray(w, dtype=complex))

    def sample_above(self, eps, gen, size):
        return max(eps, 1.0) * (1.0 - gen.uniform(size=size)) ** (-1.0 / self.a)

    def to_dict(self):
        return {"type": "pareto_tail", "a": self.a}


@dataclass(frozen=True)
class Restricted(LevyModel):
    """``base`` restricted to ``(lower, upper]``."""

    base: LevyModel
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if not (0 <= self.lower < self.upper):
            raise ValueError("restriction needs 0 <= lower < upper")

    @property
    def finite_activity(self):  # type: ignore[override]
        return self.lower > 0 or self.base.finite_activity

    def _clip(self, lo, hi):
        return max(lo, self.lower), min(hi, self.upper)

    def mass_above(self, eps):
        lo, hi = self._clip(eps, math.inf)
        if lo >= hi:
            return 0.0
        top = 0.0 if math.isinf(hi) else self.base.mass_above(hi)
        return self.base.mass_above(lo) - top

    def integrate(self, f, lower=0.0, upper=math.inf):
        lo, hi = self._clip(lower, upper)
        return self.base.integrate(f, lo, hi) if lo < hi else 0.0

    def _moment_above_one(self, kappa):
        if self.upper <= 1.0:
            return 0.0
        if math.isinf(self.upper) and self.lower <= 1.0:
            return self.base._moment_above_one(kappa)
        return self.integrate(lambda z: z**kappa, 1.0, math.inf)

    def log_tail(self):
        if self.upper <= 1.0:
            return 0.0
        if math.isinf(self.upper) and self.lower <= 1.0:
            return self.base.log_tail()
        return self.integrate(math.log, 1.0, math.inf)

    def mean_below(self, eps):
        hi = min(eps, self.upper)
        if hi <= self.lower:
            return 0.0
        return self.base.mean_below(hi) - self.base.mean_below(self.lower)

    def first_moment(self):
        if math.isinf(self.upper):
            big = self._moment_above_one(1.0)
            if math.isinf(big):
                return math.inf
        return self.integrate(lambda z: z)

    def laplace_exponent(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        out = np.empty(w.shape, dtype=complex)
        for i, wi in enumerate(w.flat):
            re = self.integrate(lambda z: math.exp(z * wi.real) * math.cos(z * wi.imag) - 1.0)
            im = self.integrate(lambda z: math.exp(z * wi.real) * math.sin(z * wi.imag))
            out.flat[i] = complex(re, im)
        return out

    def sample_above(self, eps, gen, size):
        lo = max(eps, self.lower)
        if not math.isinf(self.upper):
            raise ValueError("sampling is provided for upper-unbounded restrictions only")
        if self.mass_above(lo) <= 0:
            raise ValueError("restricted measure has no mass to sample")
        return self.base.sample_above(lo, gen, size)

    def to_dict(self):
        return {"type": "restricted", "base": self.base.to_dict(), "lower": self.lower,
                "upper": None if math.isinf(self.upper) else self.upper}


def tail_moment(model: LevyModel, kappa: float) -> TailReport:
    """``int_{z>1} z^kappa nu(dz)``, ``inf`` exactly when it diverges."""
    return model.tail_moment(kappa)


def log_tail(model: LevyModel) -> float:
    """``int_{z>1} log z nu(dz)``."""
    return model.log_tail()


def split(model: LevyModel) -> tuple[LevyModel, LevyModel]:
    """Split ``nu`` into its small-jump part on ``(0, 1]`` and big-jump part on ``(1, inf)``.

    Parts that are analytically empty come back as ``Zero()``; a part that
    carries all of ``nu`` comes back as the model itself.
    """
    if isinstance(model, Zero):
        return Zero(), Zero()
    big_mass = model.mass_above(1.0)
    small_empty = _support_min(model) >= 1.0
    small = Zero() if small_empty else Restricted(model, 0.0, 1.0)
    if big_mass == 0.0:
        big: LevyModel = Zero()
    elif small_empty:
        big = model
    else:
        big = Restricted(model, 1.0, math.inf)
    return small, big


def _support_min(model: LevyModel) -> float:
    """Left end of the support; everything in ``nu`` lies strictly above it (or at it for atoms)."""
    if isinstance(model, ParetoTail):
        return 1.0
    if isinstance(model, CompoundPoisson):
        if isinstance(model.jump, PointMass):
            return model.jump.z0
        if isinstance(model.jump, Pareto):
            return model.jump.z_min
    if isinstance(model, Restricted):
        return max(model.lower, _support_min(model.base))
    return 0.0


def sample_jump(model: LevyModel, gen: np.random.Generator, size: int | None = None):
    """Draw from the normalized big-jump law ``nu_2 / nu((1, inf))``."""
    if model.mass_above(1.0) <= 0.0:
        raise ValueError("big-jump part has zero mass; nothing to sample")
    draws = model.sample_above(1.0, gen, 1 if size is None else size)
    return float(draws[0]) if size is None else draws


def levy_from_dict(d: dict) -> LevyModel:
    kind = d.get("type")
    if kind == "zero":
        return Zero()
    if kind == "compound_poisson":
        return CompoundPoisson(float(d["rate"]), jump_law_from_dict(d["jump"]))
    if kind == "gamma_density":
        return GammaDensity(float(d["c"]), float(d["lam"]))
    if kind == "pareto_tail":
        return ParetoTail(float(d["a"]))
    if kind == "restricted":
        upper = d.get("upper")
        return Restricted(levy_from_dict(d["base"]), float(d.get("lower", 0.0)),
                          math.inf if upper is None else float(upper))
    raise ValueError(f"unknown Lévy model type {kind!r}")
