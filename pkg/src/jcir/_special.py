"""Vectorized special functions not covered by scipy for complex arguments."""
from __future__ import annotations

import math

import numpy as np

_SWITCH = 2.0
_CF_TOL = 1e-15
_CF_MAXITER = 5000
_TAYLOR_TERMS = 60


def expint_cf(p: float, x: np.ndarray) -> np.ndarray:
    """Generalized exponential integral E_p(x) by Lentz continued fraction.

    Intended for ``Re x >= 0`` and ``|x| >= 2``; ``p > 0``.
    """
    x = np.asarray(x, dtype=complex)
    tiny = 1e-300
    b = x + p
    c = np.full_like(x, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _CF_MAXITER + 1):
        an = -i * (p - 1.0 + i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > _CF_TOL
        if not active.any():
            break
    else:
        raise RuntimeError("continued fraction for E_p did not converge")
    return h * np.exp(-x)


def pareto_laplace_gap(a: float, w) -> np.ndarray:
    """``a * int_1^inf (exp(-w z) - 1) z^(-a-1) dz`` for ``Re w >= 0``.

    Equals ``E[exp(-w P)] - 1`` for a Pareto(a) variable ``P`` on ``(1, inf)``.
    Large ``|w|`` uses the continued fraction; small ``|w|`` splits the range
    at ``R = 2/|w|`` and expands ``exp(-w z)`` on ``(1, R)``, which recurses
    once onto ``|w R| = 2``.
    """
    if a <= 0:
        raise ValueError("Pareto index must be positive")
    w = np.asarray(w, dtype=complex)
    out = np.zeros(w.shape, dtype=complex)
    mod = np.abs(w)
    big = mod >= _SWITCH
    small = (mod > 0) & ~big
    if big.any():
        out[big] = a * expint_cf(a + 1.0, w[big]) - 1.0
    if small.any():
        ws = w[small]
        R = _SWITCH / mod[small]
        L = np.log(R)
        scaled = ws * R
        total = R ** (-a) * (a * expint_cf(a + 1.0, scaled) - 1.0)
        neg_w = -ws
        neg_scaled = -scaled
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            for k in range(1, _TAYLOR_TERMS + 1):
                gap = k - a
                if gap == 0.0:
                    term = neg_w**k * L
                else:
                    # near-resonant exponents keep the expm1 form to avoid cancellation
                    resonant = np.abs(gap) * L < 1.0
                    direct = (neg_scaled**k * R ** (-a) - neg_w**k) / gap
                    stable = neg_w**k * (np.expm1(gap * np.where(resonant, L, 0.0)) / gap)
                    term = np.where(resonant, stable, direct)
                total = total + a * term / math.exp(math.lgamma(k + 1))
        out[small] = total
    return out
