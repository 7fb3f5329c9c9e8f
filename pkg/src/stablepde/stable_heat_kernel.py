"""Rotationally symmetric stable densities: tabulation, scaling and convolution.

K is the inverse Fourier transform of exp(-|xi|^alpha) in d = 1 or 2.  The
radial profile is computed by rotating the inversion contour into the
complex plane where the integrand decays exponentially:

    d = 1:  K(r) = (1/pi) Re[ e^{i phi} int_0^inf exp(-s^a e^{i a phi} + i r s e^{i phi}) ds ]
    d = 2:  K(r) = (1/2pi) Re[ e^{2 i phi} int_0^inf H0(r s e^{i phi}) exp(-s^a e^{i a phi}) s ds ]

with phi = pi / (2 (1 + alpha)) and H0 the Hankel function of the first kind.
Beyond the table the power series in r^{-alpha} takes over.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.special import gamma, gammaln, hankel1

from . import radial
from .grid import Field, Grid, apply_multiplier, lp_norm

TABLE_VERSION = 1
CONVENTIONS = ("unit", "generator")


def k_at_zero(alpha: float, d: int) -> float:
    if d == 1:
        return float(gamma(1 + 1 / alpha) / np.pi)
    return float(gamma(2 / alpha) / (2 * np.pi * alpha))


def large_r_series(alpha: float, d: int, r, terms: int = 40):
    """sum_k (-1)^{k+1}/k! Gamma(k a/2 + 1) Gamma((k a + d)/2) sin(k pi a/2) (2/r)^{k a} / (pi^{d/2+1} r^d)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    x = (2.0 / r) ** alpha
    for k in range(1, terms + 1):
        lg = gammaln(k * alpha / 2 + 1) + gammaln((k * alpha + d) / 2) - gammaln(k + 1)
        term = (-1) ** (k + 1) * np.exp(lg) * np.sin(k * np.pi * alpha / 2) * x ** k
        out += term
        if np.all(np.abs(term) < 1e-18 * np.abs(out)):
            break
    return out / (np.pi ** (d / 2 + 1) * r ** d)


def small_r_series(alpha: float, d: int, r, terms: int = 30):
    """Taylor series of K at the origin (convergent for alpha > 1, asymptotic otherwise)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for k in range(terms):
        if d == 1:
            lg = gammaln((2 * k + 1) / alpha) - gammaln(2 * k + 1)
            out += (-1) ** k * np.exp(lg) * r ** (2 * k)
        else:
            lg = gammaln((2 * k + 2) / alpha) - 2 * gammaln(k + 1)
            out += (-1) ** k * np.exp(lg) * (r / 2) ** (2 * k)
    return out / (np.pi * alpha) if d == 1 else out / (2 * np.pi * alpha)


def _panels(a, b, ratio=2.0):
    k = max(1, int(np.ceil(np.log(b / a) / np.log(ratio))))
    e = np.geomspace(a, b, k + 1)
    return e[:-1], e[1:]


def contour_profile(alpha: float, d: int, r, t: float = 1.0, n_gl: int = 24) -> np.ndarray:
    """Radial profile of the density of exp(-t|xi|^alpha) at radii r > 0 by contour rotation."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    phi = np.pi / (2 * (1 + alpha))
    eph = np.exp(1j * phi)
    damp = t * np.cos(alpha * phi)
    gx, gw = np.polynomial.legendre.leggauss(n_gl)
    out = np.empty(r.shape)
    for idx, rr in np.ndenumerate(r):
        # integrand decays like exp(-damp s^a - r s sin phi)
        s_hi = (60.0 / damp) ** (1 / alpha)
        if rr > 0:
            s_hi = min(s_hi, 60.0 / (rr * np.sin(phi)))
        s_lo = min(1e-14, s_hi * 1e-14)
        lo, hi = _panels(s_lo, s_hi, 1.6)
        s = (0.5 * (hi - lo)[:, None] * (gx + 1) + lo[:, None]).ravel()
        w = (0.5 * (hi - lo)[:, None] * gw).ravel()
        z = s * eph
        base = np.exp(-t * (s ** alpha) * np.exp(1j * alpha * phi))
        if d == 1:
            val = np.sum(w * base * np.exp(1j * rr * z)) * eph
            out[idx] = val.real / np.pi
        else:
            val = np.sum(w * base * hankel1(0, rr * z) * s) * eph * eph
            out[idx] = val.real / (2 * np.pi)
    return out


def tail_integral(alpha: float, d: int, R, terms: int = 40):
    """int_{r > R} K(r) r^{d-1} dr from the large-r series integrated term by term."""
    R = np.asarray(R, dtype=float)
    out = np.zeros_like(R)
    for k in range(1, terms + 1):
        lg = gammaln(k * alpha / 2 + 1) + gammaln((k * alpha + d) / 2) - gammaln(k + 1)
        c = (-1) ** (k + 1) * np.exp(lg) * np.sin(k * np.pi * alpha / 2) * 2 ** (k * alpha)
        out = out + c * R ** (-k * alpha) / (k * alpha)
    return out / np.pi ** (d / 2 + 1)


def _profile(alpha, d, r, r_big=np.inf):
    r = np.asarray(r, dtype=float)
    out = np.empty(r.shape)
    big = r >= r_big
    if np.any(big):
        out[big] = large_r_series(alpha, d, r[big])
    if np.any(~big):
        out[~big] = contour_profile(alpha, d, r[~big])
    return out


@dataclass
class HeatKernelTable:
    """Radial table of K = G_1 with cubic log-log interpolation."""

    alpha: float
    d: int
    radii: np.ndarray
    values: np.ndarray
    convention: str = "unit"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        radial_check = np.all(np.diff(self.radii) > 0)
        if not radial_check:
            raise ValueError("radii must increase")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}")
        self._spline = CubicSpline(np.log(self.radii), np.log(self.values))
        self._k0 = k_at_zero(self.alpha, self.d)

    @property
    def scale(self) -> float:
        """Multiplier constant c in exp(-t c |xi|^alpha)."""
        return 1.0 if self.convention == "unit" else radial.frac_constant(self.alpha, self.d)

    def with_convention(self, convention: str) -> "HeatKernelTable":
        return HeatKernelTable(self.alpha, self.d, self.radii, self.values, convention, dict(self.meta))

    def K(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        out = np.empty(r.shape)
        lo = r < self.radii[0]
        hi = r > self.radii[-1]
        mid = ~(lo | hi)
        out[mid] = np.exp(self._spline(np.log(r[mid])))
        if np.any(lo):
            out[lo] = small_r_series(self.alpha, self.d, r[lo], terms=3)
        if np.any(hi):
            out[hi] = large_r_series(self.alpha, self.d, r[hi])
        return out

    def mass(self) -> float:
        """int K dx from the table plus the analytic pieces below and above it."""
        lr = np.log(self.radii)
        f = self.values * self.radii ** self.d
        h = np.diff(lr)
        # Simpson on the (uniform) log grid, trapezoid fallback for a leftover interval
        n = len(lr) - 1
        m = n - (n % 2)
        core = h[0] / 3 * (f[0] + 4 * np.sum(f[1:m:2]) + 2 * np.sum(f[2:m - 1:2]) + f[m])
        if m < n:
            core += 0.5 * h[-1] * (f[-2] + f[-1])
        sph = 2.0 if self.d == 1 else 2 * np.pi
        r0 = self.radii[0]
        small = self._k0 * r0 ** self.d / self.d
        return float(sph * (core + small + tail_integral(self.alpha, self.d, self.radii[-1])))

    def G(self, t: float, x) -> np.ndarray:
        """G_t(x) = t^{-d/alpha} K(|x| t^{-1/alpha}) in this table's convention; x of shape (..., d)."""
        return eval_G(self, t, x)


def build_kernel_table(alpha: float, d: int, n_freq: int | None = None, n_nodes: int = 4096,
                       r_lo: float = 1e-6, r_hi: float = 1e4, convention: str = "unit") -> HeatKernelTable:
    """Tabulate K on geometric radii; ``n_freq`` sets the Gauss-Legendre order of the contour rule."""
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    min_freq = 2 ** 12 if d == 1 else 2 ** 10
    n_freq = min_freq if n_freq is None else n_freq
    if n_freq < min_freq:
        raise ValueError(f"n_freq must be at least {min_freq} for d = {d}")
    radii = np.geomspace(r_lo, r_hi, n_nodes)
    vals = _profile(alpha, d, radii)
    if np.any(vals <= 0):
        raise ArithmeticError("non-positive density values in the table")
    table = HeatKernelTable(alpha, d, radii, vals, convention, {"n_freq": n_freq, "version": TABLE_VERSION})
    err = abs(table.mass() - 1.0)
    table.meta["mass_error"] = err
    if err > 1e-6:
        raise ArithmeticError(f"kernel table normalization error {err:.2e} exceeds 1e-6")
    return table


def eval_G(table: HeatKernelTable, t: float, x) -> np.ndarray:
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if table.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        r = np.abs(x)
    else:
        r = np.linalg.norm(x, axis=-1)
    te = t * table.scale
    return te ** (-table.d / table.alpha) * table.K(r * te ** (-1.0 / table.alpha))


def heat_multiplier(table: HeatKernelTable, t: float, grid: Grid) -> np.ndarray:
    return np.exp(-t * table.scale * grid.freq_norm ** table.alpha)


def convolve_G(table: HeatKernelTable, t: float, v: Field) -> Field:
    """G_t * v by the Fourier multiplier exp(-t c |xi|^alpha)."""
    if t <= 0:
        raise ValueError("t must be positive")
    return v.with_values(apply_multiplier(v.grid, v.values, heat_multiplier(table, t, v.grid),
                                          real=np.isrealobj(v.values)))


def periodized_G(table: HeatKernelTable, t: float, grid: Grid, images: int = 64) -> np.ndarray:
    """sum_m G_t(x + 2Lm) on the grid nodes, with the far images replaced by their mean."""
    d, L = grid.d, grid.L
    M = images if d == 1 else max(4, images // 4)
    out = np.zeros(grid.shape)
    ms = np.arange(-M, M + 1)
    if d == 1:
        x = grid.axis[:, None] + 2 * L * ms[None, :]
        out = eval_G(table, t, x).sum(axis=1)
    else:
        for m1 in ms:
            for m2 in ms:
                out += eval_G(table, t, grid.points + 2 * L * np.array([m1, m2]))
    # mass outside the image box, spread uniformly
    te = t * table.scale
    R = (2 * M + 1) * L * te ** (-1 / table.alpha)
    if d == 1:
        outside = 2 * _tail_mass_1d(table, R)
    else:
        outside = _tail_mass_square(table, R)
    return out + outside / (2 * L) ** d


def _tail_mass_1d(table, R):
    """int_R^inf K(r) dr."""
    if R >= table.radii[-1]:
        return float(tail_integral(table.alpha, 1, R))
    rr = np.geomspace(R, table.radii[-1], 4001)
    core = np.trapezoid(table.K(rr) * rr, np.log(rr))
    return float(core + tail_integral(table.alpha, 1, table.radii[-1]))


def _tail_mass_square(table, R, n_theta=256):
    """int over the outside of the square [-R, R]^2 of K."""
    th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    Rt = R / np.maximum(np.abs(np.cos(th)), np.abs(np.sin(th)))
    total = 0.0
    for r0 in Rt:
        if r0 >= table.radii[-1]:
            total += float(tail_integral(table.alpha, 2, r0))
            continue
        rr = np.geomspace(r0, table.radii[-1], 2001)
        total += np.trapezoid(table.K(rr) * rr * rr, np.log(rr)) + float(tail_integral(table.alpha, 2, table.radii[-1]))
    return float(total * 2 * np.pi / n_theta)


def convolve_G_table(table: HeatKernelTable, t: float, v: Field, images: int = 64) -> Field:
    """G_t * v by discrete circular convolution with the periodized tabulated kernel."""
    grid = v.grid
    g = periodized_G(table, t, grid, images)
    # node x_j = -L + j dx; the offset of node j from the origin is x_j + L
    g0 = np.roll(g, -(grid.n // 2), axis=tuple(range(grid.d)))
    conv = np.fft.ifftn(np.fft.fftn(g0) * np.fft.fftn(v.values)).real * grid.cell_volume
    return v.with_values(conv)


def smoothing_multiplier(table: HeatKernelTable, t: float, grid: Grid, gamma_idx=(), kappa: float = 0.0):
    xi = grid.wavenumbers
    mult = heat_multiplier(table, t, grid).astype(complex)
    for a, k in enumerate(gamma_idx):
        mult = mult * (1j * xi[..., a]) ** k
    if kappa > 0:
        mult = mult * (-radial.frac_constant(kappa, grid.d) * grid.freq_norm ** kappa)
    return mult


def certify_smoothing(table: HeatKernelTable, gamma_idx, kappa: float, t_list, ensemble, p: float = 2.0) -> list:
    """max over the ensemble of |d^kappa D^gamma G_t * v|_p t^{(|gamma|+kappa)/alpha} / |v|_p for each t."""
    gamma_idx = tuple(gamma_idx)
    order = sum(gamma_idx) + kappa
    out = []
    for t in t_list:
        best = 0.0
        for v in ensemble:
            grid = v.grid
            mult = smoothing_multiplier(table, t, grid, gamma_idx, kappa)
            w = apply_multiplier(grid, v.values, mult, real=True)
            den = lp_norm(grid, v.values, p)
            if den > 0:
                best = max(best, lp_norm(grid, w, p) * t ** (order / table.alpha) / den)
        out.append(best)
    return out


def l1_derivative_sum(alpha: float, d: int, gamma_idx=(), kappa: float = 0.0, L: float = 32.0, n: int = 4096) -> float:
    """Grid sum of |d^kappa D^gamma K| dx on a periodic box of half-width L."""
    grid = Grid(d, L, n)
    xi = grid.wavenumbers
    mult = np.exp(-grid.freq_norm ** alpha).astype(complex)
    for a, k in enumerate(gamma_idx):
        mult = mult * (1j * xi[..., a]) ** k
    if kappa > 0:
        mult = mult * (-radial.frac_constant(kappa, d) * grid.freq_norm ** kappa)
    vals = np.fft.ifftn(mult).real * (n / (2 * L)) ** d
    return float(np.sum(np.abs(vals)) * grid.cell_volume)


def radial_cdf(table: HeatKernelTable, r) -> np.ndarray:
    """P(|X| <= r) for X with density K (d = 1: P(|X| <= r) = 2 int_0^r K)."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    lr = np.log(table.radii)
    f = table.values * table.radii ** table.d
    cum = cumulative_simpson(f, x=lr, initial=0.0)
    sph = 2.0 if table.d == 1 else 2 * np.pi
    small = table._k0 * table.radii[0] ** table.d / table.d
    cum = sph * (cum + small)
    out = CubicSpline(lr, cum)(np.log(np.clip(r, table.radii[0], table.radii[-1])))
    out = np.where(r < table.radii[0], sph * table._k0 * np.maximum(r, 0) ** table.d / table.d, out)
    far = r > table.radii[-1]
    if np.any(far):
        out[far] = 1.0 - sph * tail_integral(table.alpha, table.d, r[far])
    return np.clip(out, 0.0, 1.0)


def cdf_1d(table: HeatKernelTable, x, t: float = 1.0) -> np.ndarray:
    """CDF of the one-dimensional density G_t."""
    if table.d != 1:
        raise ValueError("cdf_1d needs d = 1")
    te = t * table.scale
    z = np.asarray(x, dtype=float) * te ** (-1 / table.alpha)
    half = 0.5 * radial_cdf(table, np.abs(z)).reshape(np.shape(z))
    return 0.5 + np.sign(z) * half


def table_arrays(table: HeatKernelTable):
    header = {"kind": "heat-kernel-table", "alpha": table.alpha, "d": table.d, "convention": table.convention,
              "version": TABLE_VERSION, "mass_error": table.meta.get("mass_error")}
    return np.stack([table.radii, table.values]), header


def write_table(path, table: HeatKernelTable):
    from .fieldio import write_array
    arr, header = table_arrays(table)
    return write_array(path, arr, header)


def read_table(path) -> HeatKernelTable:
    from .fieldio import read_array
    arr, header = read_array(path)
    if header.get("kind") != "heat-kernel-table":
        raise ValueError(f"{path} is not a heat kernel table")
    return HeatKernelTable(header["alpha"], header["d"], arr[0], arr[1], header["convention"],
                           {"version": header["version"], "mass_error": header.get("mass_error")})
