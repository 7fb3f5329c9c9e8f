"""Periodic grids, sampled fields and the spectral helpers shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [-L, L)^d with n points per axis."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two >= 4")
        if self.L <= 0:
            raise ValueError("L must be positive")

    @property
    def dx(self) -> float:
        return 2 * self.L / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.d

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.n)

    @cached_property
    def points(self) -> np.ndarray:
        """Node coordinates, shape (*shape, d)."""
        if self.d == 1:
            return self.axis[:, None]
        X, Y = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Frequency vectors xi_k = pi k / L in FFT order, shape (*shape, d)."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n) * np.pi / self.L
        if self.d == 1:
            return k[:, None]
        KX, KY = np.meshgrid(k, k, indexing="ij")
        return np.stack([KX, KY], axis=-1)

    @cached_property
    def freq_norm(self) -> np.ndarray:
        return np.linalg.norm(self.wavenumbers, axis=-1)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.d, self.L, self.n * factor)

    def torus_distance(self, a, b):
        diff = np.asarray(a) - np.asarray(b)
        diff = (diff + self.L) % (2 * self.L) - self.L
        return np.linalg.norm(np.atleast_1d(diff), axis=-1) if diff.ndim else abs(diff)

    def wrap(self, x):
        return (np.asarray(x) + self.L) % (2 * self.L) - self.L


@dataclass
class Field:
    """Real or complex samples of a function on a periodic grid.

    ``values`` has shape ``grid.shape`` for a single slice or
    ``(len(times),) + grid.shape`` when ``times`` is given.
    """

    grid: Grid
    values: np.ndarray
    times: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        expect = self.grid.shape if self.times is None else (len(self.times),) + self.grid.shape
        if self.values.shape != expect:
            raise ValueError(f"values shape {self.values.shape} does not match {expect}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def time_indexed(self) -> bool:
        return self.times is not None

    def slice(self, k: int) -> "Field":
        return Field(self.grid, self.values[k])

    def with_values(self, values) -> "Field":
        return Field(self.grid, values, self.times)

    def __add__(self, other: "Field") -> "Field":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        return self.with_values(self.values - other.values)

    def __mul__(self, c) -> "Field":
        return self.with_values(self.values * c)

    __rmul__ = __mul__


def spatial_axes(grid: Grid, values: np.ndarray) -> tuple:
    return tuple(range(values.ndim - grid.d, values.ndim))


def fft(grid: Grid, values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values, axes=spatial_axes(grid, values))


def ifft(grid: Grid, coeffs: np.ndarray, real: bool = True) -> np.ndarray:
    out = np.fft.ifftn(coeffs, axes=spatial_axes(grid, coeffs))
    return out.real if real else out


def apply_multiplier(grid: Grid, values: np.ndarray, mult: np.ndarray, real: bool | None = None) -> np.ndarray:
    """Multiply Fourier coefficients by ``mult`` (shape grid.shape)."""
    if real is None:
        real = np.isrealobj(values) and _hermitian(grid, mult)
    return ifft(grid, fft(grid, values) * mult, real=real)


def _hermitian(grid: Grid, mult: np.ndarray) -> bool:
    flipped = mult
    for ax in range(grid.d):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return bool(np.allclose(np.conj(flipped), mult, rtol=1e-13, atol=1e-13 * (np.max(np.abs(mult)) + 1)))


def gradient(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral gradient; the component index is appended as the last axis."""
    coeffs = fft(grid, values)
    xi = grid.wavenumbers
    comps = []
    for a in range(grid.d):
        ka = xi[..., a].copy()
        if grid.n % 2 == 0:
            # the Nyquist mode has no well-defined odd derivative
            ka[np.isclose(np.abs(ka), np.pi * grid.n / (2 * grid.L))] = 0.0
        comps.append(ifft(grid, 1j * ka * coeffs, real=np.isrealobj(values)))
    return np.stack(comps, axis=-1)


def hessian(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral second derivatives, shape values.shape + (d, d)."""
    coeffs = fft(grid, values)
    xi = grid.wavenumbers
    out = np.empty(values.shape + (grid.d, grid.d), dtype=values.dtype if np.iscomplexobj(values) else float)
    for a in range(grid.d):
        for b in range(a, grid.d):
            comp = ifft(grid, -xi[..., a] * xi[..., b] * coeffs, real=np.isrealobj(values))
            out[..., a, b] = comp
            out[..., b, a] = comp
    return out


def shift(grid: Grid, values: np.ndarray, y) -> np.ndarray:
    """u(x + y) for an arbitrary (off-lattice) shift by spectral interpolation."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    phase = np.exp(1j * grid.wavenumbers @ y)
    if grid.n % 2 == 0:
        # split the Nyquist mode symmetrically so real input stays real
        nyq = np.isclose(np.abs(grid.wavenumbers), np.pi * grid.n / (2 * grid.L)).any(axis=-1)
        phase = np.where(nyq, np.cos(grid.wavenumbers @ y), phase)
    return apply_multiplier(grid, values, phase, real=np.isrealobj(values))


def lp_norm(grid: Grid, values: np.ndarray, p: float) -> float:
    """Discrete L_p norm over a single slice (cell-volume weighted)."""
    a = np.abs(values)
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * grid.cell_volume) ** (1.0 / p))


def time_weights(times: np.ndarray) -> np.ndarray:
    """Trapezoid weights on a (possibly nonuniform) time partition."""
    t = np.asarray(times, dtype=float)
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def spacetime_lp(grid: Grid, values: np.ndarray, times: np.ndarray, p: float) -> float:
    """{ int_0^T |v(t)|_p^p dt }^{1/p} with trapezoid weights in time."""
    a = np.abs(values)
    axes = spatial_axes(grid, values)
    if np.isinf(p):
        return float(a.max())
    per_slice = np.sum(a ** p, axis=axes) * grid.cell_volume
    return float(np.sum(time_weights(times) * per_slice) ** (1.0 / p))


class SpectralInterpolator:
    """Evaluate a periodic grid function at arbitrary points.

    The field is band-limited; it is upsampled by FFT zero padding and then
    interpolated (multi)linearly on the fine grid, which matches the
    trigonometric interpolant to O((dx / upsample)^2).
    """

    def __init__(self, grid: Grid, values: np.ndarray, upsample: int = 16):
        self.grid = grid
        n_fine = grid.n * upsample
        coeffs = np.fft.fftn(values)
        pad = np.zeros((n_fine,) * grid.d, dtype=complex)
        h = grid.n // 2
        if grid.d == 1:
            pad[:h] = coeffs[:h]
            pad[-h:] = coeffs[-h:]
            # split Nyquist
            pad[h] = 0.5 * coeffs[h]
            pad[-h] = 0.5 * coeffs[h]
        else:
            idx = np.r_[0:h, n_fine - h:n_fine]
            src = np.r_[0:h, grid.n - h:grid.n]
            pad[np.ix_(idx, idx)] = coeffs[np.ix_(src, src)]
        self.fine = np.fft.ifftn(pad).real * upsample ** grid.d
        self.h = 2 * grid.L / n_fine
        self.n_fine = n_fine

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        L = self.grid.L
        if self.grid.d == 1:
            s = ((x.reshape(-1) + L) % (2 * L)) / self.h
            i0 = np.floor(s).astype(int) % self.n_fine
            w = s - np.floor(s)
            out = (1 - w) * self.fine[i0] + w * self.fine[(i0 + 1) % self.n_fine]
            return out.reshape(x.shape[:-1] if x.ndim > 1 and x.shape[-1] == 1 else x.shape)
        pts = x.reshape(-1, 2)
        s = ((pts + L) % (2 * L)) / self.h
        i0 = np.floor(s).astype(int) % self.n_fine
        w = s - np.floor(s)
        i1 = (i0 + 1) % self.n_fine
        f = self.fine
        out = ((1 - w[:, 0]) * (1 - w[:, 1]) * f[i0[:, 0], i0[:, 1]]
               + w[:, 0] * (1 - w[:, 1]) * f[i1[:, 0], i0[:, 1]]
               + (1 - w[:, 0]) * w[:, 1] * f[i0[:, 0], i1[:, 1]]
               + w[:, 0] * w[:, 1] * f[i1[:, 0], i1[:, 1]])
        return out.reshape(x.shape[:-1])


def random_bandlimited(grid: Grid, rng: np.random.Generator, k_lo: float, k_hi: float, size: int = 1) -> np.ndarray:
    """Real random fields whose Fourier support is the shell k_lo <= |xi| <= k_hi."""
    shell = (grid.freq_norm >= k_lo) & (grid.freq_norm <= k_hi)
    out = np.empty((size,) + grid.shape)
    for i in range(size):
        c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * shell
        v = ifft(grid, c, real=False).real
        out[i] = v / np.sqrt(np.mean(v ** 2))
    return out


def third_derivatives(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral third derivatives, shape values.shape + (d, d, d)."""
    coeffs = fft(grid, values)
    xi = grid.wavenumbers
    real = np.isrealobj(values)
    out = np.empty(values.shape + (grid.d,) * 3, dtype=float if real else complex)
    for a in range(grid.d):
        for b in range(grid.d):
            for c in range(grid.d):
                out[..., a, b, c] = ifft(grid, -1j * xi[..., a] * xi[..., b] * xi[..., c] * coeffs, real=real)
    return out
