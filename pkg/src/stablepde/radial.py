"""Closed-form radial integrals of the compensated stable jump phase.

For a jump measure ``m(w) dr / r^{1+alpha}`` along a direction ``w`` the
symbol reduces to one-dimensional integrals of

    e^{i r s} - 1 - chi(r) i r s

against ``r^{-1-alpha}``.  After the substitution ``u = r|s|`` everything
is expressed through two scalar functions of the upper limit,

    Rc(x) = int_0^x (1 - cos u) u^{-1-alpha} du
    Rs(x) = int_0^x (sin u - chi u) u^{-1-alpha} du

which are evaluated by power series for small ``x``, a cached cumulative
table of the exponential tail integral for moderate ``x`` and an asymptotic
expansion for large ``x``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import gamma, gammaln

EULER_GAMMA = 0.57721566490153286061

_SERIES_MAX = 8.0
_TAB_MAX = 200.0
_TAB_STEP = 0.25
_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def is_alpha_one(alpha: float) -> bool:
    return abs(alpha - 1.0) < 1e-12


def compensator(alpha: float, r):
    """chi_alpha(y) as a function of |y|: 1 for alpha > 1, 1_{|y|<=1} at alpha = 1."""
    r = np.asarray(r, dtype=float)
    if is_alpha_one(alpha):
        return (r <= 1.0).astype(float)
    if alpha > 1.0:
        return np.ones_like(r)
    return np.zeros_like(r)


def rc_inf(alpha: float) -> float:
    if is_alpha_one(alpha):
        return np.pi / 2
    return float(gamma(1 - alpha) * np.cos(np.pi * alpha / 2) / alpha)


def rs_inf(alpha: float) -> float:
    if is_alpha_one(alpha):
        return 1.0 - EULER_GAMMA
    return float(gamma(1 - alpha) * np.sin(np.pi * alpha / 2) / alpha)


def sphere_moment(alpha: float, d: int) -> float:
    """int_{S^{d-1}} |w_1|^alpha mu(dw)."""
    if d == 1:
        return 2.0
    if d == 2:
        return float(2 * np.sqrt(np.pi) * np.exp(gammaln((alpha + 1) / 2) - gammaln(alpha / 2 + 1)))
    raise ValueError("only d in {1, 2} is supported")


def frac_constant(alpha: float, d: int) -> float:
    """c_{d,alpha} > 0 such that the symbol of the jump-integral fractional Laplacian is -c|xi|^alpha."""
    return rc_inf(alpha) * sphere_moment(alpha, d)


def _series_rc(alpha, x):
    x = np.where(x > 0, x, 1.0)
    out = np.zeros_like(x)
    x2 = x * x
    p = np.ones_like(x)
    fact = 1.0
    for k in range(1, 31):
        p = p * x2
        fact *= (2 * k - 1) * (2 * k)
        out += (-1) ** (k + 1) * p / (fact * (2 * k - alpha))
    return out * x ** (-alpha)


def _series_rs(alpha, x):
    x = np.where(x > 0, x, 1.0)
    out = np.zeros_like(x)
    x2 = x * x
    p = x.copy()
    fact = 1.0
    for k in range(1, 31):
        p = p * x2
        fact *= (2 * k) * (2 * k + 1)
        out += (-1) ** k * p / (fact * (2 * k + 1 - alpha))
    out = out * x ** (-alpha)
    if is_alpha_one(alpha):
        out += np.log(np.maximum(x, 1.0))
    elif alpha < 1:
        out += x ** (1 - alpha) / (1 - alpha)
    return out


def _asymptotic_tail(alpha, x, terms=14):
    # int_x^inf e^{iu} u^{-1-alpha} du ~ e^{ix} sum_j i^{j+1} g^{(j)}(x)
    out = np.zeros(np.shape(x), dtype=complex)
    coef = 1.0
    for j in range(terms):
        out += (1j) ** (j + 1) * (-1) ** j * coef * x ** (-1.0 - alpha - j)
        coef *= 1.0 + alpha + j
    return np.exp(1j * x) * out


def _gl_segment(alpha, a, b):
    # int_a^b e^{iu} u^{-1-alpha} du, vectorised over a, b
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    u = a + half * (_GL_X + 1)
    return (half[..., 0]) * np.sum(_GL_W * np.exp(1j * u) * u ** (-1 - alpha), axis=-1)


@lru_cache(maxsize=64)
def _tail_table(alpha: float):
    knots = np.arange(_SERIES_MAX, _TAB_MAX + 0.5 * _TAB_STEP, _TAB_STEP)
    seg = _gl_segment(alpha, knots[:-1], knots[1:])
    vals = np.empty(knots.size, dtype=complex)
    vals[-1] = _asymptotic_tail(alpha, np.array(knots[-1]))
    vals[:-1] = vals[-1] + np.cumsum(seg[::-1])[::-1]
    return knots, vals


def exp_tail(alpha: float, x):
    """E(x) = int_x^inf e^{iu} u^{-1-alpha} du for x >= 8."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    big = x > _TAB_MAX
    out[big] = _asymptotic_tail(alpha, x[big])
    mid = ~big
    if np.any(mid):
        knots, vals = _tail_table(float(alpha))
        xm = x[mid]
        k = np.clip(np.floor((xm - _SERIES_MAX) / _TAB_STEP).astype(int), 0, knots.size - 1)
        out[mid] = vals[k] - _gl_segment(alpha, knots[k], xm)
    return out


def exp_tail_any(alpha: float, x):
    """E(x) for any x > 0 (series below 8)."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    lo = x < _SERIES_MAX
    if np.any(lo):
        xl = x[lo]
        # E(x) = E(8) + int_x^8 e^{iu} u^{-1-alpha} du, the latter from the series
        e8 = exp_tail(alpha, np.array([_SERIES_MAX]))[0]
        re = (xl ** (-alpha) - _SERIES_MAX ** (-alpha)) / alpha - (_series_rc(alpha, np.full_like(xl, _SERIES_MAX)) - _series_rc(alpha, xl))
        s8 = _series_rs(alpha, np.full_like(xl, _SERIES_MAX)) - _series_rs(alpha, xl)
        if is_alpha_one(alpha):
            s8 = s8 - np.log(np.minimum(xl, 1.0))
        elif alpha > 1:
            s8 = s8 + (xl ** (1 - alpha) - _SERIES_MAX ** (1 - alpha)) / (alpha - 1)
        out[lo] = e8 + re + 1j * s8
    if np.any(~lo):
        out[~lo] = exp_tail(alpha, x[~lo])
    return out


def rc(alpha: float, x):
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    inf = np.isinf(x)
    out[inf] = rc_inf(alpha)
    small = (x <= _SERIES_MAX) & ~inf
    out[small] = np.where(x[small] > 0, _series_rc(alpha, x[small]), 0.0)
    large = ~small & ~inf
    if np.any(large):
        xl = x[large]
        out[large] = rc_inf(alpha) - (xl ** (-alpha) / alpha - exp_tail(alpha, xl).real)
    return out


def rs(alpha: float, x):
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    inf = np.isinf(x)
    out[inf] = rs_inf(alpha)
    small = (x <= _SERIES_MAX) & ~inf
    out[small] = np.where(x[small] > 0, _series_rs(alpha, x[small]), 0.0)
    large = ~small & ~inf
    if np.any(large):
        xl = x[large]
        val = rs_inf(alpha) - exp_tail(alpha, xl).imag
        if alpha > 1 and not is_alpha_one(alpha):
            val = val + xl ** (1 - alpha) / (alpha - 1)
        out[large] = val
    return out


def radial_integral(alpha: float, s, a=0.0, b=np.inf):
    """int_a^b [e^{irs} - 1 - chi(r) i r s] r^{-1-alpha} dr, vectorised over s.

    ``a`` and ``b`` are radii (``a`` may be 0, ``b`` may be inf).
    """
    s = np.asarray(s, dtype=float)
    sa = np.abs(s)
    out = np.zeros(s.shape, dtype=complex)
    nz = sa > 0
    if not np.any(nz):
        return out
    s_ = sa[nz]
    lo = a * s_
    hi = b * s_ if np.isfinite(b) else np.full_like(s_, np.inf)
    re = -(rc(alpha, hi) - rc(alpha, lo))
    im = rs(alpha, hi) - rs(alpha, lo)
    if is_alpha_one(alpha):
        # the series uses 1_{u<=1}; the compensator in r is 1_{u<=|s|}
        lo_c = np.maximum(lo, np.minimum(s_, 1.0))
        hi_c = np.minimum(hi, np.maximum(s_, 1.0))
        seg = np.log(np.maximum(hi_c / lo_c, 1.0))
        im = im + np.where(s_ < 1.0, seg, -seg)
    val = s_ ** alpha * (re + 1j * im)
    out[nz] = np.where(s[nz] > 0, val, np.conj(val))
    return out
