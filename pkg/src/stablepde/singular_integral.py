"""Nonlocal operators on periodic grids and the L_p certification helpers.

The jump operator is discretized by splitting the jump vector y into three
regions:

* a small square |y|_inf < 2 dx, where u(x+y) - u(x) is replaced by its
  second-order Taylor expansion with spectral first and second derivatives;
* the rest of the fundamental cell |y|_inf <= L, treated by product
  integration: u is interpolated (multi)linearly between lattice nodes and
  the kernel is integrated exactly against each hat function by Gauss-Legendre
  quadrature.  The leading interpolation error of each cell,
  1/2 u''(y-a)(b-y), is integrated against the kernel and removed as a
  lattice convolution of the second derivatives, which makes the scheme
  second order;
* periodic images out to |y|_inf <= (2K+1) L by the trapezoid rule under a
  smooth radial window, with the complementary windowed tail integrated
  analytically after replacing u(x+y) by its mean.  The window makes the
  neglected oscillatory part decay faster than any power of the box size.

For a kernel that does not depend on x the result is a convolution, so it
is applied as a Fourier multiplier built from the lattice weights.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from . import radial
from .grid import Field, Grid, apply_multiplier, fft, gradient, hessian, ifft, lp_norm, shift, third_derivatives
from .kernel_model import (AssumptionError, KernelSpec, LowerOrderSpec, _angular_rule, check_alpha1_cancellation,
                           lower_compensator)

_GL_CACHE: dict = {}


def _gl01(n):
    if n not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1), 0.5 * w)
    return _GL_CACHE[n]


@dataclass(frozen=True)
class OperatorQuad:
    inner_cells: int = 2
    gl_1d: int = 8
    gl_2d: int = 6
    images_1d: int = 8
    images_2d: int = 4
    n_theta: int = 16
    radial_nodes: int = 16


@dataclass
class JumpWeights:
    """Discrete jump operator for an x-independent kernel.

    Au = sum_j w_j (u(x+y_j) - u(x)) - 1/2 sum_j sum_a e_aj d_aa u(x+y_j)
         + drift . grad u + hess : D^2 u + cubic : D^3 u + tail (mean u - u)
    """

    grid: Grid
    w: np.ndarray
    defect: np.ndarray
    drift: np.ndarray
    hess: np.ndarray
    cubic: np.ndarray
    tail: float
    far_mass: float

    def multiplier(self) -> np.ndarray:
        g = self.grid
        n, d = g.n, g.d
        corr = (n ** d) * np.fft.ifftn(self.w)
        xi = g.wavenumbers
        for a in range(d):
            corr = corr + 0.5 * xi[..., a] ** 2 * (n ** d) * np.fft.ifftn(self.defect[a])
        mult = corr - self.w.sum() + 1j * (xi @ self.drift) - np.einsum("...a,ab,...b->...", xi, self.hess, xi)
        mult = mult - 1j * np.einsum("...a,...b,...c,abc->...", xi, xi, xi, self.cubic)
        mult = mult - self.tail
        mult[(0,) * d] = 0.0
        return _hermitize(mult)


def _hermitize(mult):
    flipped = mult
    for ax in range(mult.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return 0.5 * (mult + np.conj(flipped))


# --------------------------------------------------------------- radial pieces

def _power_integral(f, b, p, n):
    """int_0^b r^p f(r) dr for p > -1, vectorised over the array of limits b.

    Uses v = r^{p+1} so the weight becomes uniform; f receives radii of shape b.shape + (n,).
    """
    u, w = _gl01(n)
    b = np.asarray(b, dtype=float)
    V = b ** (p + 1)
    r = (V[..., None] * u) ** (1.0 / (p + 1))
    return np.sum(w * f(r), axis=-1) * V / (p + 1)


def _log_integral(f, a, b, n):
    """int_a^b f(r) dr / r, vectorised over a and b."""
    u, w = _gl01(n)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    la, lb = np.log(a), np.log(np.maximum(b, a))
    s = la[..., None] + (lb - la)[..., None] * u
    return np.sum(w * f(np.exp(s)), axis=-1) * (lb - la)


def smooth_window(r, r1, r2):
    """C-infinity radial window: 1 for r <= r1, 0 for r >= r2."""
    t = np.clip((np.asarray(r, dtype=float) - r1) / (r2 - r1), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t < 1, np.exp(-1.0 / np.maximum(1 - t, 1e-300)), 0.0)
        b = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    return a / (a + b)


def _inner_and_tail(mfun, alpha, chi_fn, d, rho, r1, r2, quad: OperatorQuad, breaks):
    """Taylor-region moments inside the square of half-width rho and the windowed tail beyond radius r1."""
    if d == 1:
        w = np.array([[1.0], [-1.0]])
        mu = np.array([1.0, 1.0])
        rin = np.full(2, rho)
    else:
        brk = np.concatenate([np.pi / 4 * np.arange(8), np.asarray(breaks, dtype=float)])
        theta, mu = _angular_rule(brk, quad.n_theta)
        w = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        sq = np.maximum(np.abs(w[:, 0]), np.abs(w[:, 1]))
        rin = rho / sq
    nr = quad.radial_nodes

    def along(r):
        return mfun(r[..., None] * w[:, None, :])

    # 1/2 int y y^T m k and 1/6 int y y y m k over the inner square
    i2 = _power_integral(along, rin, 1.0 - alpha, nr)
    hess = 0.5 * np.einsum("k,k,ka,kb->ab", mu, i2, w, w)
    i3 = _power_integral(along, rin, 2.0 - alpha, nr)
    cubic = np.einsum("k,k,ka,kb,kc->abc", mu, i3, w, w, w) / 6.0
    # int (1 - chi) y m k over the inner square
    drift = np.zeros(d)
    if alpha < 1:
        i1 = _power_integral(along, rin, -alpha, nr)
        drift += np.einsum("k,k,ka->a", mu, i1, w)
    elif radial.is_alpha_one(alpha) and np.any(rin > 1):
        i1 = _log_integral(along, np.ones_like(rin), np.maximum(rin, 1.0), nr)
        drift += np.einsum("k,k,ka->a", mu, i1, w)
    # windowed tail: int (1 - window) m k over [r1, r2] by Gauss-Legendre in log r, exact beyond r2 (m frozen)
    gu, gw = _gl01(48)
    lr = np.log(r1) + (np.log(r2) - np.log(r1)) * gu
    r = np.exp(lr)
    wr = gw * (np.log(r2) - np.log(r1)) * r * (1 - smooth_window(r, r1, r2))
    mr = mfun(r[:, None, None] * w[None])  # (nr, ndir)
    tail = float(np.sum(mu * np.sum(wr[:, None] * mr * r[:, None] ** (-1 - alpha), axis=0)))
    m2 = mfun(r2 * w)
    tail += float(np.sum(mu * m2)) * r2 ** (-alpha) / alpha
    if alpha > 1 and not radial.is_alpha_one(alpha):
        first = np.sum(wr[:, None] * mr * chi_fn(r)[:, None] * r[:, None] ** (-alpha), axis=0)
        first = first + m2 * chi_fn(np.array(r2)) * r2 ** (1 - alpha) / (alpha - 1)
        drift -= np.einsum("k,k,ka->a", mu, first, w)
    return hess, drift, cubic, tail


# ----------------------------------------------------------------- the engine

def jump_weights(mfun, alpha: float, grid: Grid, chi_fn=None, quad: OperatorQuad | None = None,
                 breaks=()) -> JumpWeights:
    """Lattice weights of the jump operator with x-independent density ``mfun(y)``."""
    quad = quad or OperatorQuad()
    chi_fn = chi_fn or (lambda r: radial.compensator(alpha, r))
    if grid.d == 1:
        return _weights_1d(mfun, alpha, grid, chi_fn, quad)
    return _weights_2d(mfun, alpha, grid, chi_fn, quad, breaks)


def _weights_1d(mfun, alpha, grid, chi_fn, quad):
    n, dx = grid.n, grid.dx
    h = n // 2
    ic = quad.inner_cells
    K = quad.images_1d
    J = (2 * K + 1) * h
    W = np.zeros(2 * J + 1)
    E = np.zeros(2 * J + 1)
    u, wu = _gl01(quad.gl_1d)
    j = np.arange(ic, h)
    drift = 0.0
    for sgn in (1.0, -1.0):
        y = sgn * (j[:, None] + u) * dx
        val = mfun(y[..., None]) * np.abs(y) ** (-1 - alpha) * wu * dx
        np.add.at(W, J + (sgn * j).astype(int), np.sum(val * (1 - u), axis=1))
        np.add.at(W, J + (sgn * (j + 1)).astype(int), np.sum(val * u, axis=1))
        # per-cell defect int (y-a)(b-y) m k, shared by the two end nodes
        e = 0.5 * np.sum(val * u * (1 - u), axis=1) * dx * dx
        np.add.at(E, J + (sgn * j).astype(int), e)
        np.add.at(E, J + (sgn * (j + 1)).astype(int), e)
        drift -= np.sum(chi_fn(np.abs(y)) * val * y)
    # far field by the trapezoid rule on nodes h <= |j| <= J
    jj = np.arange(h, J + 1)
    tw = np.full(jj.shape, dx)
    tw[0] *= 0.5
    tw[-1] *= 0.5
    far_mass = 0.0
    r1, r2 = h * dx, J * dx
    tw = tw * smooth_window(jj * dx, r1, r2)
    for sgn in (1.0, -1.0):
        y = sgn * jj * dx
        val = mfun(y[:, None]) * np.abs(y) ** (-1 - alpha) * tw
        W[J + (sgn * jj).astype(int)] += val
        far_mass += float(np.sum(val))
        drift -= np.sum(chi_fn(np.abs(y)) * val * y)
    hess, dr_in, cub, tail = _inner_and_tail(mfun, alpha, chi_fn, 1, ic * dx, r1, r2, quad, ())
    wt = np.zeros(n)
    et = np.zeros((1, n))
    np.add.at(wt, np.arange(-J, J + 1) % n, W)
    np.add.at(et[0], np.arange(-J, J + 1) % n, E)
    return JumpWeights(grid, wt, et, np.array([drift]) + dr_in, hess, cub, tail, far_mass + tail)


def _weights_2d(mfun, alpha, grid, chi_fn, quad, breaks):
    n, dx = grid.n, grid.dx
    h = n // 2
    ic = quad.inner_cells
    K = quad.images_2d
    J = (2 * K + 1) * h
    size = 2 * J + 1
    W = np.zeros((size, size))
    E = np.zeros((2, size, size))
    u, wu = _gl01(quad.gl_2d)
    U1, U2 = np.meshgrid(u, u, indexing="ij")
    WU = np.outer(wu, wu) * dx * dx
    hats = [((1 - U1) * (1 - U2), 0, 0), (U1 * (1 - U2), 1, 0), ((1 - U1) * U2, 0, 1), (U1 * U2, 1, 1)]
    drift = np.zeros(2)
    B1 = U1 * (1 - U1) * dx * dx
    B2 = U2 * (1 - U2) * dx * dx
    cols = np.arange(-h, h)
    for i in range(-h, h):
        jc = cols
        if -ic <= i < ic:
            jc = cols[(cols < -ic) | (cols >= ic)]
        y1 = (i + U1)[None] * dx * np.ones((jc.size, 1, 1))
        y2 = (jc[:, None, None] + U2[None]) * dx
        y = np.stack([y1, y2], axis=-1)
        r = np.hypot(y1, y2)
        val = mfun(y) * r ** (-2 - alpha) * WU
        for hat, di, dj in hats:
            np.add.at(W, (J + i + di, J + jc + dj), np.sum(val * hat, axis=(1, 2)))
        e1 = 0.25 * np.sum(val * B1, axis=(1, 2))
        e2 = 0.25 * np.sum(val * B2, axis=(1, 2))
        for _, di, dj in hats:
            np.add.at(E[0], (J + i + di, J + jc + dj), e1)
            np.add.at(E[1], (J + i + di, J + jc + dj), e2)
        drift -= np.einsum("kab,kabi->i", val * chi_fn(r), y)
    idx = np.arange(-J, J + 1)
    Y1, Y2 = np.meshgrid(idx * dx, idx * dx, indexing="ij")
    # far field: trapezoid on the big square minus trapezoid on the fundamental cell
    eR = np.where(np.abs(idx) == J, 0.5, 1.0)
    eL = np.where(np.abs(idx) == h, 0.5, np.where(np.abs(idx) < h, 1.0, 0.0))
    tw = (np.outer(eR, eR) - np.outer(eL, eL)) * dx * dx
    far = np.maximum(np.abs(idx)[:, None], np.abs(idx)[None, :]) >= h
    ys = np.stack([Y1[far], Y2[far]], axis=-1)
    rf = np.hypot(ys[:, 0], ys[:, 1])
    r1, r2 = np.sqrt(2.0) * h * dx, J * dx
    # average over a tiny rotation so nodes lying on an angular jump of m get the midpoint value
    c, s_ = np.cos(1e-9), np.sin(1e-9)
    rot = np.array([[c, -s_], [s_, c]])
    mval = 0.5 * (mfun(ys @ rot.T) + mfun(ys @ rot))
    val = mval * rf ** (-2 - alpha) * tw[far] * smooth_window(rf, r1, r2)
    W[far] += val
    far_mass = float(np.sum(val))
    drift -= np.einsum("k,ki->i", val * chi_fn(rf), ys)
    hess, dr_in, cub, tail = _inner_and_tail(mfun, alpha, chi_fn, 2, ic * dx, r1, r2, quad, breaks)
    wt = np.zeros((n, n))
    et = np.zeros((2, n, n))
    fold = (idx[:, None] % n, idx[None, :] % n)
    np.add.at(wt, fold, W)
    np.add.at(et[0], fold, E[0])
    np.add.at(et[1], fold, E[1])
    return JumpWeights(grid, wt, et, drift + dr_in, hess, cub, tail, far_mass + tail)


# -------------------------------------------------------------- public ops

_CACHE: "OrderedDict" = OrderedDict()
_CACHE_MAX = 64


def _cached(key, build):
    try:
        val = _CACHE[key]
        _CACHE.move_to_end(key)
        return val
    except KeyError:
        pass
    except TypeError:
        return build()
    val = build()
    _CACHE[key] = val
    if len(_CACHE) > _CACHE_MAX:
        _CACHE.popitem(last=False)
    return val


def clear_cache():
    _CACHE.clear()


def frac_constant(kappa: float, d: int) -> float:
    return radial.frac_constant(kappa, d)


def frac_multiplier(grid: Grid, kappa: float) -> np.ndarray:
    return -radial.frac_constant(kappa, grid.d) * grid.freq_norm ** kappa


def frac_laplacian(v: Field, kappa: float) -> Field:
    """The generator of the rotationally symmetric kappa-stable process applied spectrally."""
    if not 0 < kappa < 2:
        raise ValueError("kappa must lie in (0, 2)")
    return v.with_values(apply_multiplier(v.grid, v.values, frac_multiplier(v.grid, kappa), real=np.isrealobj(v.values)))


def _t_key(spec: KernelSpec, t):
    return None if spec.time_independent else float(t)


def _check_alpha1(spec: KernelSpec, t, grid: Grid):
    if not radial.is_alpha_one(spec.alpha):
        return
    pts = [np.zeros(grid.d)] if spec.x_independent else [np.zeros(grid.d), np.full(grid.d, 0.5 * grid.L),
                                                         np.full(grid.d, -0.7 * grid.L)]
    for x in pts:
        if not check_alpha1_cancellation(spec, t, x):
            raise AssumptionError("alpha = 1 kernel fails the ring cancellation check")


def operator_weights(mfun_y, alpha, grid, quad=None, breaks=(), chi_fn=None):
    return jump_weights(mfun_y, alpha, grid, chi_fn, quad, breaks)


def _term_multipliers(spec: KernelSpec, t, grid: Grid, quad: OperatorQuad):
    """(a_k(x) on grid, multiplier of b_k, far mass) for each separable term."""
    def build():
        out = []
        for a, b in spec.terms:
            jw = jump_weights(lambda y, b=b: np.asarray(b(t, y), dtype=float), spec.alpha, grid, None, quad,
                              spec.angular_breaks)
            ax = np.asarray(a(t, grid.points), dtype=float)
            out.append((np.broadcast_to(ax, grid.shape), jw.multiplier(), jw.far_mass))
        return out
    return _cached(("terms", spec, _t_key(spec, t), grid, quad), build)


def kernel_multiplier(spec: KernelSpec, t, grid: Grid, quad: OperatorQuad | None = None) -> np.ndarray:
    """Fourier multiplier of the discrete operator for an x-independent kernel."""
    quad = quad or OperatorQuad()
    if not spec.x_independent:
        raise ValueError("kernel_multiplier requires an x-independent kernel")

    def build():
        x0 = np.zeros(grid.d)
        jw = jump_weights(lambda y: spec(t, x0, y), spec.alpha, grid, None, quad, spec.angular_breaks)
        return jw.multiplier(), jw.far_mass
    return _cached(("mult", spec, _t_key(spec, t), grid, quad), build)[0]


@dataclass
class OperatorResult:
    field: Field
    far_mass: float


def apply_A(spec: KernelSpec, t: float, u: Field, quad: OperatorQuad | None = None, diagnostics: bool = False):
    """Au = int [u(x+y) - u(x) - chi(y)(grad u, y)] m(t,x,y) dy/|y|^{d+alpha} on the periodic grid."""
    quad = quad or OperatorQuad()
    grid = u.grid
    if spec.d != grid.d:
        raise ValueError("kernel and grid dimensions differ")
    _check_alpha1(spec, t, grid)
    vals = u.values
    if spec.x_independent:
        x0 = np.zeros(grid.d)

        def build():
            jw = jump_weights(lambda y: spec(t, x0, y), spec.alpha, grid, None, quad, spec.angular_breaks)
            return jw.multiplier(), jw.far_mass
        mult, far = _cached(("mult", spec, _t_key(spec, t), grid, quad), build)
        out = apply_multiplier(grid, vals, mult, real=np.isrealobj(vals))
    elif spec.terms:
        out = np.zeros(vals.shape, dtype=np.result_type(vals, float))
        coeffs = fft(grid, vals)
        far = 0.0
        for ax, mult, fm in _term_multipliers(spec, t, grid, quad):
            out += ax * ifft(grid, coeffs * mult, real=np.isrealobj(vals))
            far = max(far, float(np.max(np.abs(ax))) * fm)
    else:
        out, far = _apply_pointwise(lambda x, y: spec(t, x, y), spec.alpha, grid, vals, quad, spec.angular_breaks,
                                    None, ("pw", spec, _t_key(spec, t), grid, quad))
    res = u.with_values(out)
    if diagnostics:
        return OperatorResult(res, far)
    return res


def _apply_pointwise(mxy, alpha, grid, vals, quad, breaks, chi_fn, key):
    """General x-dependent kernel: one weight set per grid node."""
    def build():
        pts = grid.points.reshape(-1, grid.d)
        Ws, Es, Ds, Hs, Cs, Ts, far = [], [], [], [], [], [], 0.0
        for x in pts:
            jw = jump_weights(lambda y, x=x: np.asarray(mxy(x, y), dtype=float), alpha, grid, chi_fn, quad, breaks)
            Ws.append(jw.w.reshape(-1))
            Es.append(jw.defect.reshape(grid.d, -1))
            Ds.append(jw.drift)
            Hs.append(jw.hess)
            Cs.append(jw.cubic)
            Ts.append(jw.tail)
            far = max(far, jw.far_mass)
        return np.array(Ws), np.array(Es), np.array(Ds), np.array(Hs), np.array(Cs), np.array(Ts), far
    W, E, D, H, C3, T, far = _cached(key, build)
    n, d = grid.n, grid.d
    flat = vals.reshape(-1)
    if d == 1:
        idx = (np.arange(n)[:, None] + np.arange(n)[None, :]) % n
    else:
        i1, i2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        x1, x2 = i1.reshape(-1), i2.reshape(-1)
        idx = ((x1[:, None] + i1.reshape(-1)[None, :]) % n) * n + (x2[:, None] + i2.reshape(-1)[None, :]) % n
    jump = np.einsum("ij,ij->i", W, flat[idx]) - W.sum(axis=1) * flat
    g = gradient(grid, vals).reshape(-1, d)
    hs = hessian(grid, vals).reshape(-1, d, d)
    for a in range(d):
        jump = jump - 0.5 * np.einsum("ij,ij->i", E[:, a, :], hs[:, a, a][idx])
    ts = third_derivatives(grid, vals).reshape(-1, d, d, d)
    out = (jump + np.einsum("ia,ia->i", D, g) + np.einsum("iab,iab->i", H, hs) + np.einsum("iabc,iabc->i", C3, ts)
           + T * (flat.mean() - flat))
    return out.reshape(vals.shape), far


def grid_symbol(spec: KernelSpec, t: float, grid: Grid, x_ref=None, quad=None, exact: bool = True) -> np.ndarray:
    """Multiplier psi(t, x_ref, xi_k) on every grid wavenumber.

    Direction-only kernels use the closed-form radial integral (exact up to
    the angular rule); other kernels use the discrete operator's multiplier.
    """
    x_ref = np.zeros(grid.d) if x_ref is None else np.atleast_1d(np.asarray(x_ref, dtype=float))
    frozen = spec if spec.x_independent else spec.frozen(t, x_ref)
    if exact and spec.direction_only:
        def build():
            return direction_symbol(lambda w: frozen(t, x_ref, w), spec.alpha, grid, spec.angular_breaks)
        return _cached(("gsym", spec, float(t) if not spec.time_independent else None, grid, tuple(x_ref)), build)
    return kernel_multiplier(frozen, t, grid, quad)


def direction_symbol(mdir, alpha, grid: Grid, breaks=(), eps=None, n_theta: int = 32) -> np.ndarray:
    """sum over directions of m(w) * int_{eps}^{1/eps} [...] r^{-1-alpha} dr at every grid wavenumber."""
    a, b = (0.0, np.inf) if eps is None else (eps, 1.0 / eps)
    xi = grid.wavenumbers.reshape(-1, grid.d)
    if grid.d == 1:
        w = np.array([[1.0], [-1.0]])
        mw = np.asarray(mdir(w), dtype=float)
        s = xi @ w.T
        vals = mw * radial.radial_integral(alpha, s, a, b)
        out = vals[:, 0] + vals[:, 1]
    else:
        phi = np.arctan2(xi[:, 1], xi[:, 0])
        brk = np.concatenate([(phi + np.pi / 2)[:, None], np.broadcast_to(np.asarray(breaks, float), (len(phi), len(breaks)))],
                             axis=1)
        theta, mu = _angular_rule(brk, n_theta)
        out = np.zeros(len(phi), dtype=complex)
        for lo in range(0, len(phi), 512):
            sl = slice(lo, lo + 512)
            wv = np.stack([np.cos(theta[sl]), np.sin(theta[sl])], axis=-1)
            mw = np.asarray(mdir(wv), dtype=float)
            s = np.einsum("kna,ka->kn", wv, xi[sl])
            vals = mu[sl] * mw * radial.radial_integral(alpha, s, a, b)
            half = vals.shape[1] // 2
            out[sl] = np.sum(vals[:, :half] + vals[:, half:], axis=1)
    out = out.reshape(grid.shape)
    out[(0,) * grid.d] = 0.0
    return _hermitize(out)


# ------------------------------------------------------------ lower order B

def apply_B(low: LowerOrderSpec, alpha: float, t: float, u: Field, part: str = "all",
            quad: OperatorQuad | None = None) -> Field:
    """Drift + jump perturbation; ``part`` selects all, the small jumps |y|<=eps0, or the big jumps."""
    if part not in ("all", "small", "big"):
        raise ValueError("part must be 'all', 'small' or 'big'")
    quad = quad or OperatorQuad()
    grid = u.grid
    vals = u.values
    real = np.isrealobj(vals)
    out = np.zeros(vals.shape, dtype=np.result_type(vals, float))
    hi = alpha > 1 and not radial.is_alpha_one(alpha)
    grad = gradient(grid, vals) if (hi or low.atoms) else None
    if hi and low.b is not None and part in ("all", "small"):
        bx = low.drift(t, grid.points)
        out += np.einsum("...a,...a->...", bx, grad)
    eps0 = low.eps0
    if part == "all":
        sel = lambda r: np.ones_like(r)
        chi = lambda r: lower_compensator(alpha, r)
    elif part == "small":
        sel = lambda r: (r <= eps0).astype(float)
        chi = lambda r: lower_compensator(alpha, r)
    else:
        sel = lambda r: (r > eps0).astype(float)
        chi = lambda r: np.zeros_like(r)
    if low.h is not None:
        def hfun(x, y):
            r = np.linalg.norm(y, axis=-1)
            return low.density(t, x, y) * sel(r)
        if low.x_independent:
            x0 = np.zeros(grid.d)
            jw = jump_weights(lambda y: hfun(x0, y), alpha, grid, chi, quad)
            out += apply_multiplier(grid, vals, jw.multiplier(), real=real)
        else:
            res, _ = _apply_pointwise(hfun, alpha, grid, vals, quad, (), chi, None)
            out += res
    for y0, wt in low.atoms:
        y0 = np.atleast_1d(np.asarray(y0, dtype=float))
        r0 = float(np.linalg.norm(y0))
        if float(sel(np.array(r0))) == 0.0:
            continue
        term = shift(grid, vals, y0) - vals
        if float(chi(np.array(r0))) > 0:
            term = term - grad @ y0
        out += wt * term
    return u.with_values(out)


def b_split(low: LowerOrderSpec, alpha, t, u: Field, quad=None):
    """(B^{eps0} u, R u) with B = B^{eps0} + R and R the big-jump part."""
    return apply_B(low, alpha, t, u, "small", quad), apply_B(low, alpha, t, u, "big", quad)


# -------------------------------------------------------------- shift identity

def riesz_constant(delta: float, d: int) -> float:
    """Constant of the Riesz potential int |z|^{-d+delta} g(x-z) dz whose multiplier is |xi|^{-delta}."""
    return float(gamma((d - delta) / 2) / (np.pi ** (d / 2) * 2 ** delta * gamma(delta / 2)))


def shift_constant(delta: float, d: int) -> float:
    """C with u(x+y) - u(x) = C int k^(delta)(y, z) partial^delta u(x-z) dz."""
    return -riesz_constant(delta, d) / radial.frac_constant(delta, d)


def shift_kernel(z, y, delta):
    """k^(delta)(z, y) = |z+y|^{-d+delta} - |z|^{-d+delta} (z, y of shape (..., d))."""
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    d = z.shape[-1]
    return np.linalg.norm(z + y, axis=-1) ** (delta - d) - np.linalg.norm(z, axis=-1) ** (delta - d)


def _cell_average_1d(delta, y, z_edges):
    """Exact integrals of k^(delta)(z, y) over the intervals between consecutive edges (d = 1)."""
    def prim(z):
        return np.sign(z) * np.abs(z) ** delta / delta
    return (prim(z_edges[1:] + y) - prim(z_edges[:-1] + y)) - (prim(z_edges[1:]) - prim(z_edges[:-1]))


def shift_table(grid: Grid, y, delta: float, images: int = 64, q: int = 6) -> np.ndarray:
    """Cell integrals of k^(delta)(., y) folded onto the torus (weights of a discrete convolution)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n, dx = grid.n, grid.dx
    if grid.d == 1:
        J = (2 * images + 1) * (n // 2)
        j = np.arange(-J, J + 1)
        edges = np.concatenate([(j - 0.5) * dx, [(J + 0.5) * dx]])
        cell = _cell_average_1d(delta, float(y[0]), edges)
        wt = np.zeros(n)
        np.add.at(wt, j % n, cell)
        return wt
    # d = 2: tensor Gauss-Legendre per cell; nodes avoid the lattice so the point singularities are never hit
    u, wu = _gl01(q)
    J = (2 * max(1, images // 16) + 1) * (n // 2)
    j = np.arange(-J, J + 1)
    wt = np.zeros((n, n))
    U1, U2 = np.meshgrid(u - 0.5, u - 0.5, indexing="ij")
    WU = np.outer(wu, wu) * dx * dx
    for i in j:
        z1 = (i + U1)[None] * dx * np.ones((j.size, 1, 1))
        z2 = (j[:, None, None] + U2[None]) * dx
        z = np.stack([z1, z2], axis=-1)
        vals = np.sum(shift_kernel(z, y, delta) * WU, axis=(1, 2))
        np.add.at(wt, (np.full(j.size, i % n), j % n), vals)
    return wt


def shift_reconstruct(v: Field, delta: float, y) -> Field:
    """C int k^(delta)(z, y) partial^delta v(x - z) dz, a validation oracle for u(x+y) - u(x)."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    grid = v.grid
    if not np.any(y):
        return v.with_values(np.zeros_like(v.values))
    g = frac_laplacian(v, delta).values
    wt = shift_table(grid, y, delta)
    # sum_j wt_j g(x - z_j) is a circular convolution
    conv = np.fft.ifftn(np.fft.fftn(wt) * fft(grid, g)).real
    return v.with_values(shift_constant(delta, grid.d) * conv)


def shift_kernel_l1(y: float, delta: float, R: float = 1e3, n_per_unit: int | None = None, dz: float | None = None) -> float:
    """Grid sum of |k^(delta)(z, y)| dz on the line (d = 1), with exact cell integrals and analytic tail."""
    y = abs(float(y))
    dz = dz if dz is not None else y / 64
    nz = int(np.ceil(R / dz))
    edges = np.arange(-nz, nz + 1) * dz
    # split the cell containing the sign change at z = -y/2
    edges = np.unique(np.concatenate([edges, [-y / 2]]))
    cell = _cell_average_1d(delta, y, edges)
    tail = 2 * y * R ** (delta - 1)
    return float(np.sum(np.abs(cell)) + tail)


# ---------------------------------------------------------- L_p certification

def truncated_multiplier(spec: KernelSpec, grid: Grid, eps: float | None, t: float = 0.0) -> np.ndarray:
    """Multiplier of the operator with kernel m(y) 1_{eps<=|y|<=1/eps} (eps=None: no truncation)."""
    if not spec.x_independent:
        raise ValueError("certification requires a kernel depending on y only")
    x0 = np.zeros(grid.d)
    if spec.direction_only:
        return direction_symbol(lambda w: spec(t, x0, w), spec.alpha, grid, spec.angular_breaks, eps)
    if eps is None:
        return kernel_multiplier(spec, t, grid)

    def mtr(y):
        r = np.linalg.norm(y, axis=-1)
        return spec(t, x0, y) * ((r >= eps) & (r <= 1 / eps))
    return jump_weights(mtr, spec.alpha, grid, None, None, spec.angular_breaks).multiplier()


def tail_mass(spec: KernelSpec, eps: float, t: float = 0.0) -> float:
    """int_{|y|>1/eps} m dy/|y|^{d+alpha} for a direction-only kernel."""
    from .kernel_model import direction_rule
    w, mu = direction_rule(spec.d, 512)
    return float(np.sum(mu * spec(t, np.zeros(spec.d), w)) * eps ** spec.alpha / spec.alpha)


def certify_Lp_bound(spec: KernelSpec, alpha: float, p: float, ensemble, eps: float | None = None,
                     t: float = 0.0) -> float:
    """max over the ensemble of |L^eps u|_p / |partial^alpha u|_p."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    if abs(spec.alpha - alpha) > 1e-14:
        spec = spec.with_alpha(alpha)
    fields = list(ensemble)
    if not fields:
        raise ValueError("empty ensemble")
    grid = fields[0].grid
    num_mult = truncated_multiplier(spec, grid, eps, t)
    den_mult = frac_multiplier(grid, alpha)
    best = 0.0
    used = 0
    for f in fields:
        den = lp_norm(grid, apply_multiplier(grid, f.values, den_mult, real=True), p)
        if den <= 1e-300:
            continue
        num = lp_norm(grid, apply_multiplier(grid, f.values, num_mult, real=True), p)
        best = max(best, num / den)
        used += 1
    if used == 0:
        raise ValueError("all ensemble members have zero denominator")
    return best


def certify_sweep(spec: KernelSpec, alpha: float, p_list, ensemble, eps_list=(1e-1, 1e-2, 1e-3, 1e-4)) -> list:
    """Rows (epsilon, p, empirical_constant, tail_mass) for the CSV diagnostic."""
    rows = []
    s = spec.with_alpha(alpha)
    for p in p_list:
        for eps in eps_list:
            rows.append({"epsilon": eps, "p": p, "empirical_constant": certify_Lp_bound(s, alpha, p, ensemble, eps),
                         "tail_mass": tail_mass(s, eps) if s.direction_only else None})
    return rows


def narrowband_ensemble(grid: Grid, rng: np.random.Generator, size: int = 20, k_min: float | None = None,
                        k_max: float | None = None, width: float = 0.25) -> list:
    """Random real fields each concentrated on a shell around a log-spaced centre frequency."""
    k_min = k_min or np.pi / grid.L
    k_max = k_max or 0.5 * np.pi * grid.n / (2 * grid.L)
    centres = np.geomspace(k_min, k_max, size)
    out = []
    for kc in centres:
        shell = np.abs(np.log(np.maximum(grid.freq_norm, 1e-300) / kc)) <= width
        if not np.any(shell):
            shell = np.isclose(grid.freq_norm, grid.freq_norm.flat[np.argmin(np.abs(grid.freq_norm - kc))])
        c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * shell
        v = np.real(np.fft.ifftn(c))
        out.append(Field(grid, v / max(np.sqrt(np.mean(v ** 2)), 1e-300)))
    return out
