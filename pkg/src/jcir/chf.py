"""Characteristic functions of the JCIR process and their Fourier inversion.

All transforms are ``u -> E[exp(u X)]`` on the half plane ``Re u <= 0``;
``u = i w`` gives the Fourier transform and real ``u <= 0`` the Laplace
transform.  The law of ``X_t`` started at ``x`` is the convolution of a CIR
law with the law of the jump-driven part ``Z_t``, so

    jcir_chf = cir_chf * exp(z_exponent).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .levy import LevyModel, Zero, levy_from_dict

Z_EPSREL = 1e-10
Z_EPSABS = 1e-12
_BLOCK = 1024


class InversionWarning(UserWarning):
    """Numerical transform or inversion did not reach its target accuracy."""


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of ``dX = (a - bX) dt + sigma sqrt(X) dB + dJ``."""

    a: float
    b: float
    sigma: float
    levy: LevyModel = field(default_factory=Zero)

    def __post_init__(self):
        for name in ("a", "b", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")
        if self.a < 0:
            raise ValueError(f"a must be nonnegative, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def require_positive_a(self, what: str) -> None:
        if not self.a > 0:
            raise ValueError(f"{what} requires a > 0 (got a = {self.a})")

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "sigma": self.sigma, "levy": self.levy.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(float(d["a"]), float(d["b"]), float(d["sigma"]), levy_from_dict(d.get("levy", {"type": "zero"})))


def _as_u(u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if np.any(u.real > 0):
        raise ValueError("transforms are evaluated on Re u <= 0 only")
    return u


def _out(val):
    return complex(val) if np.ndim(val) == 0 else val


def _denominator(params: ModelParams, t, u):
    """``1 - sigma^2 u (1 - e^{-bt}) / (2b)``; real part >= 1 on Re u <= 0."""
    return 1.0 - params.sigma**2 * u * (-np.expm1(-params.b * np.asarray(t, dtype=float))) / (2.0 * params.b)


def psi(params: ModelParams, t, u):
    """``u e^{-bt} / (1 - sigma^2 u (1 - e^{-bt}) / (2b))``."""
    u = _as_u(u)
    return _out(u * np.exp(-params.b * np.asarray(t, dtype=float)) / _denominator(params, t, u))


def _cir_log_chf(params: ModelParams, t: float, x0: float, u: np.ndarray) -> np.ndarray:
    den = _denominator(params, t, u)
    # principal log is safe: Re den >= 1 keeps it off the branch cut
    assert np.all(den.real >= 1.0 - 1e-12)
    return -(2.0 * params.a / params.sigma**2) * np.log(den) + x0 * u * math.exp(-params.b * t) / den


def cir_chf(params: ModelParams, t: float, x0: float, u):
    """Transform of the CIR law (no jumps) at time ``t`` from ``x0``."""
    u = _as_u(u)
    return _out(np.exp(_cir_log_chf(params, t, x0, u)))


def _check_quad(err: float, scale: float, what: str) -> None:
    if err > 100.0 * max(Z_EPSABS, Z_EPSREL * scale):
        warnings.warn(f"{what}: quadrature error bound {err:.3g} above target", InversionWarning, stacklevel=3)


def z_exponent(params: ModelParams, t: float, u, epsrel: float = Z_EPSREL, epsabs: float = Z_EPSABS):
    """``int_0^t int (exp(z psi(s, u)) - 1) nu(dz) ds``.

    The inner integral uses the closed-form Laplace exponent of the Lévy
    model; the outer one is adaptive Gauss-Kronrod over ``s`` and is
    vectorized across ``u``.
    """
    u = _as_u(u)
    if isinstance(params.levy, Zero) or t == 0:
        return _out(np.zeros(u.shape, dtype=complex))
    flat = u.ravel()
    nz = flat != 0
    res = np.zeros(flat.shape, dtype=complex)
    if nz.any():
        uu = flat[nz]
        integrand = lambda s: params.levy.laplace_exponent(psi(params, s, uu))
        val, err = integrate.quad_vec(integrand, 0.0, t, epsabs=epsabs, epsrel=epsrel, norm="max", limit=2000)
        _check_quad(err, float(np.max(np.abs(val))), "z_exponent")
        res[nz] = val
    return _out(res.reshape(u.shape))


def jcir_chf(params: ModelParams, t: float, x0: float, u, **quad):
    """Transform of ``X_t`` started at ``x0``: CIR factor times the jump factor."""
    u = _as_u(u)
    return _out(np.exp(_cir_log_chf(params, t, x0, u) + z_exponent(params, t, u, **quad)))


def stationary_exponent(params: ModelParams, u, epsrel: float = Z_EPSREL, epsabs: float = Z_EPSABS):
    """``int_0^inf int (exp(z psi(s, u)) - 1) nu(dz) ds`` without truncating the s-range.

    Along ``s`` the point ``w = psi(s, u)`` solves ``dw/ds = w (sigma^2 w / 2 - b)`` and
    runs from ``u`` to ``0`` inside ``Re w <= 0``, where the Laplace exponent
    ``Lambda`` is analytic.  Moving the path onto the segment ``w = tau u`` gives

        int_0^1 Lambda(tau u) / (tau (b - sigma^2 tau u / 2)) dtau,

    integrated with ``tau = v^2`` to soften the endpoint behaviour at 0.
    """
    u = _as_u(u)
    if isinstance(params.levy, Zero):
        return _out(np.zeros(u.shape, dtype=complex))
    flat = u.ravel()
    nz = flat != 0
    res = np.zeros(flat.shape, dtype=complex)
    if nz.any():
        uu = flat[nz]
        half_s2 = 0.5 * params.sigma**2

        def integrand(v, uu):
            if v == 0.0:
                return np.zeros(uu.shape, dtype=complex)
            w = v * v * uu
            return 2.0 * params.levy.laplace_exponent(w) / (v * (params.b - half_s2 * w))

        vals = np.empty(uu.shape, dtype=complex)
        # blocks of similar |u| let the adaptive rule refine only where needed
        order = np.argsort(np.abs(uu))
        for block in np.array_split(order, max(1, uu.size // _BLOCK)):
            sub = uu[block]
            f = lambda v, sub=sub: integrand(v, sub)
            val, err = integrate.quad_vec(f, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, norm="max", limit=4000)
            _check_quad(err, float(np.max(np.abs(val))), "stationary_exponent")
            vals[block] = val
        res[nz] = vals
    return _out(res.reshape(u.shape))


def stationary_chf(params: ModelParams, u, s_horizon: float | None = None, **quad):
    """Large-time limit of ``jcir_chf``: the x-term drops and the s-integral runs to infinity.

    By default the s-integral is evaluated exactly (see ``stationary_exponent``).
    A finite ``s_horizon`` truncates it instead and warns when the bound from
    ``stationary_tail_bound`` exceeds ``1e-10``.
    """
    u = _as_u(u)
    log_cir = -(2.0 * params.a / params.sigma**2) * np.log(1.0 - params.sigma**2 * u / (2.0 * params.b))
    if s_horizon is None:
        return _out(np.exp(log_cir + stationary_exponent(params, u, **quad)))
    tail = stationary_tail_bound(params, float(np.max(np.abs(u))) if u.size else 0.0, s_horizon)
    if tail > 1e-10:
        warnings.warn(f"stationary s-horizon {s_horizon:g} leaves a tail of up to {tail:.2g}",
                      InversionWarning, stacklevel=2)
    return _out(np.exp(log_cir + z_exponent(params, s_horizon, u, **quad)))


def stationary_tail_bound(params: ModelParams, u_abs: float, horizon: float) -> float:
    """Bound on ``|int_H^inf int (e^{z psi} - 1) nu(dz) ds|`` using ``|psi(s,u)| <= |u| e^{-bs}``."""
    if isinstance(params.levy, Zero) or u_abs == 0:
        return 0.0
    levy = params.levy

    def gap(r: float) -> float:
        # int min(2, z r) nu(dz)
        if r <= 0:
            return 0.0
        cut = 2.0 / r
        return r * levy.mean_below(cut) + 2.0 * levy.mass_above(cut)

    r0 = u_abs * math.exp(-params.b * horizon)
    # substitute r = |u| e^{-bs}: ds = dr / (b r)
    val, _ = integrate.quad(lambda r: gap(r) / r, 0.0, r0, limit=200)
    return val / params.b


def transition_moments(params: ModelParams, t: float, x0: float) -> tuple[float, float]:
    """Mean and variance of ``X_t`` (``inf`` when the jumps lack the moment)."""
    b, s2 = params.b, params.sigma**2
    e1 = math.exp(-b * t)
    one_m = -math.expm1(-b * t)
    mean_cir = x0 * e1 + params.a * one_m / b
    var_cir = x0 * s2 / b * (e1 - e1 * e1) + params.a * s2 / (2 * b * b) * one_m**2
    if isinstance(params.levy, Zero):
        return mean_cir, var_cir
    m1 = params.levy.first_moment()
    m2 = params.levy.moment(2.0)
    mean = mean_cir + m1 * one_m / b
    if math.isinf(m2):
        return mean, math.inf
    one_m2 = -math.expm1(-2 * b * t)
    # each jump of size z and age s adds a Bessel variable with E[B^2] = z^2 e^{-2bs} + z s2 e^{-bs} (1 - e^{-bs}) / b
    var_z = m2 * one_m2 / (2 * b) + m1 * s2 / b * (one_m / b - one_m2 / (2 * b))
    return mean, var_cir + var_z


# --------------------------------------------------------------------------
# Fourier inversion
# --------------------------------------------------------------------------


@dataclass
class DensityGrid:
    t: float
    x0: float
    points: list[tuple[float, float]]
    inversion_error_estimate: float
    min_interior: float
    support: float = math.nan
    n_terms: int = 0

    @property
    def y(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def density(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


def _cos_coefficients(chf, L: float, n: int) -> np.ndarray:
    """``Re chf(i k pi / L)`` for ``k < n``; the COS expansion of a law on ``[0, L]``."""
    w = np.arange(n) * math.pi / L
    return np.real(chf(1j * w))


def _blocked(y: np.ndarray, n: int, fn) -> np.ndarray:
    """Apply ``fn`` to slices of ``y`` so the (points x terms) matrix stays near 32 MB."""
    rows = max(1, 4_000_000 // max(n, 1))
    return np.concatenate([fn(y[i:i + rows]) for i in range(0, y.size, rows)]) if y.size else y.copy()


def _cos_density(coef: np.ndarray, L: float, y: np.ndarray) -> np.ndarray:
    k = np.arange(coef.size)
    c = coef.copy()
    c[0] *= 0.5
    return _blocked(y, k.size, lambda yb: (2.0 / L) * (np.cos(np.outer(yb, k) * math.pi / L) @ c))


def _cos_cdf(coef: np.ndarray, L: float, y: np.ndarray) -> np.ndarray:
    k = np.arange(1, coef.size)
    w = k * math.pi / L
    return _blocked(y, k.size, lambda yb: yb / L + (2.0 / L) * (np.sin(np.outer(yb, w)) / w) @ coef[1:])


def _default_support(params: ModelParams, t: float | None, x0: float, y_max: float) -> float:
    if t is None:
        mean, var = transition_moments(params, 60.0 / params.b, 0.0)
    else:
        mean, var = transition_moments(params, t, x0)
    if math.isfinite(mean) and math.isfinite(var):
        return max(1.1 * y_max, mean + 14.0 * math.sqrt(var))
    return max(1.5 * y_max, 60.0 * (1.0 + y_max))


def _invert(chf, L: float, n_terms: int, y: np.ndarray, kind: str):
    """COS inversion with an empirical error estimate.

    The reported values use ``(2n, 2L)``; the estimate adds the change from
    doubling the support at fixed frequency cut-off and from halving the
    number of terms at fixed support.
    """
    evaluate = _cos_density if kind == "density" else _cos_cdf
    coef_big = _cos_coefficients(chf, 2 * L, 2 * n_terms)
    coef_base = coef_big[::2]  # same frequencies as (n, L)
    fine = evaluate(coef_big, 2 * L, y)
    base = evaluate(coef_base, L, y)
    coarse = evaluate(coef_base[: n_terms // 2], L, y)
    err = float(np.max(np.abs(fine - base)) + np.max(np.abs(base - coarse)))
    return fine, err


def invert_density(params: ModelParams, t: float, x0: float, y_grid, n_terms: int = 8192,
                   support: float | None = None, tol: float = 1e-4) -> DensityGrid:
    """Transition density on ``y_grid`` by Fourier-cosine inversion of ``jcir_chf``."""
    params.require_positive_a("density inversion")
    if not t > 0:
        raise ValueError("density inversion needs t > 0")
    y = np.asarray(y_grid, dtype=float)
    L = support or _default_support(params, t, x0, float(y.max()))
    chf = lambda u: jcir_chf(params, t, x0, u)
    dens, err = _invert(chf, L, n_terms, y, "density")
    if err > tol:
        warnings.warn(f"density inversion error estimate {err:.2g} exceeds {tol:g}; "
                      "raise n_terms or the support", InversionWarning, stacklevel=2)
    interior = (y > y.min()) & (y < y.max()) if y.size > 2 else np.ones(y.size, bool)
    return DensityGrid(t, x0, list(zip(y.tolist(), dens.tolist())), err,
                       float(dens[interior].min()) if interior.any() else float(dens.min()), L, 2 * n_terms)


def invert_cdf(chf, y, support: float, n_terms: int = 8192) -> tuple[np.ndarray, float]:
    """CDF of a nonnegative law from its transform (COS), with error estimate."""
    return _invert(chf, support, n_terms, np.asarray(y, dtype=float), "cdf")


def transition_cdf(params: ModelParams, t: float, x0: float, y, n_terms: int = 8192,
                   support: float | None = None) -> tuple[np.ndarray, float]:
    y = np.asarray(y, dtype=float)
    L = support or _default_support(params, t, x0, float(y.max()))
    return invert_cdf(lambda u: jcir_chf(params, t, x0, u), y, L, n_terms)


def cdf_gil_pelaez(chf, y, omega_max: float, panels_per_unit: float | None = None, order: int = 12):
    """``F(y) = 1/2 - (1/pi) int_0^inf Im[e^{-i w y} chf(i w)] / w dw``.

    Needs no support truncation, so it also serves heavy-tailed laws.  On
    ``[0, 1]`` the substitution ``w = v^2`` tames ``w^{-1/2}`` behaviour of
    the integrand; beyond, Gauss-Legendre panels resolve the oscillation.
    The chf is evaluated once on all nodes and shared by every ``y``.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, wts = np.polynomial.legendre.leggauss(order)
    # [0, 1] in v = sqrt(w), geometric panels towards v = 0
    edges_v = np.concatenate([[0.0], np.geomspace(1e-6, 1.0, 25)])
    v_nodes, v_w = _panel_nodes(edges_v, x, wts)
    w_head = v_nodes**2
    jac_head = 2.0 * v_nodes * v_w
    y_span = max(float(y.max()), 1.0)
    # one oscillation period of e^{-i w y_max} per 12-point panel
    per_unit = panels_per_unit or max(1.0, y_span / (2.0 * math.pi))
    n_pan = max(1, int(math.ceil((omega_max - 1.0) * per_unit)))
    edges_w = np.linspace(1.0, omega_max, n_pan + 1) if omega_max > 1 else np.array([1.0])
    w_tail, jac_tail = _panel_nodes(edges_w, x, wts) if omega_max > 1 else (np.empty(0), np.empty(0))
    w_all = np.concatenate([w_head, w_tail])
    jac = np.concatenate([jac_head, jac_tail])
    phi = np.asarray(chf(1j * w_all), dtype=complex)
    kern = np.imag(np.exp(-1j * np.outer(y, w_all)) * phi[None, :]) / w_all[None, :]
    return 0.5 - (kern @ jac) / math.pi


def _panel_nodes(edges, x, wts):
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
    weights = 0.5 * (b - a) * wts[None, :]
    return nodes.ravel(), weights.ravel()


def cir_decay_cutoff(params: ModelParams, t: float | None, tol: float) -> float:
    """Frequency beyond which the CIR factor bounds the Gil-Pelaez tail by ``tol``.

    ``|chf(i w)| <= (c w)^{-p}`` with ``p = 2a / sigma^2`` and
    ``c = sigma^2 (1 - e^{-bt}) / (2b)`` (``t = None`` for the stationary law).
    """
    params.require_positive_a("Gil-Pelaez inversion")
    p = 2.0 * params.a / params.sigma**2
    frac = 1.0 if t is None else -math.expm1(-params.b * t)
    c = params.sigma**2 * frac / (2.0 * params.b)
    return (math.pi * p * tol) ** (-1.0 / p) / c
