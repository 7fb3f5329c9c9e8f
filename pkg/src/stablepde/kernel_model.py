"""Lévy kernels of stable-like operators, their assumption checks and the operator symbol.

A jump kernel is a callable ``m(t, x, y)`` evaluated with NumPy broadcasting:
``x`` and ``y`` are arrays whose last axis has length ``d`` and the result has
the broadcast shape of the leading axes.  The operator it defines is

    A u(x) = int [u(x+y) - u(x) - chi(y) (grad u(x), y)] m(t,x,y) dy / |y|^{d+alpha}

with ``chi(y) = 1`` for alpha > 1, ``1_{|y|<=1}`` for alpha = 1 and 0 otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import radial

TWO_PI = 2 * np.pi


class AssumptionError(ValueError):
    """Raised when a kernel or lower-order term violates a structural assumption."""


@dataclass(frozen=True)
class StableIndex:
    alpha: float

    def __post_init__(self):
        if not 0.0 < float(self.alpha) < 2.0:
            raise ValueError(f"alpha must lie in (0, 2), got {self.alpha}")

    @property
    def is_one(self) -> bool:
        return radial.is_alpha_one(self.alpha)

    def chi(self, r):
        return radial.compensator(self.alpha, r)


def zero_modulus(delta):
    return np.zeros_like(np.asarray(delta, dtype=float))


@dataclass(frozen=True)
class AuxKernelSpec:
    """Degree-zero homogeneous lower envelope m0(t, w) of a jump kernel."""

    m0: Callable
    d: int
    K_upper: float = 1.0
    smoothness_order: int | None = None

    def __post_init__(self):
        if self.smoothness_order is None:
            object.__setattr__(self, "smoothness_order", self.d // 2 + 1)

    def __call__(self, t, y):
        y = np.asarray(y, dtype=float)
        r = np.linalg.norm(y, axis=-1, keepdims=True)
        return np.asarray(self.m0(t, y / np.where(r > 0, r, 1.0)), dtype=float)


@dataclass(frozen=True)
class KernelSpec:
    """Jump density m(t, x, y) together with its structural constants.

    ``terms`` optionally lists a separable decomposition
    ``m(t,x,y) = sum_k a_k(t,x) b_k(t,y)`` which lets x-dependent operators be
    applied by a few FFT convolutions.  ``angular_breaks`` lists the polar
    angles (d = 2) where m may jump as a function of the direction of y.
    """

    m: Callable
    alpha: float
    d: int
    K_upper: float
    eta: float = 0.0
    modulus_w: Callable = zero_modulus
    beta: float = 1.0
    aux: AuxKernelSpec | None = None
    x_independent: bool = False
    time_independent: bool = True
    direction_only: bool = False
    terms: tuple = ()
    angular_breaks: tuple = ()
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        StableIndex(self.alpha)
        if self.d not in (1, 2):
            raise ValueError("only d in {1, 2} is supported")
        if self.K_upper <= 0:
            raise ValueError("K_upper must be positive")

    @property
    def index(self) -> StableIndex:
        return StableIndex(self.alpha)

    def __call__(self, t, x, y):
        return np.asarray(self.m(t, np.asarray(x, dtype=float), np.asarray(y, dtype=float)), dtype=float)

    def frozen(self, t, x0) -> "KernelSpec":
        """The x-independent kernel y -> m(t, x0, y)."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        m, t0 = self.m, t

        def mf(t_, x_, y_):
            y_ = np.asarray(y_, dtype=float)
            return np.broadcast_to(m(t0, x0, y_), np.broadcast_shapes(np.shape(x_)[:-1], y_.shape[:-1]))

        return replace(self, m=mf, x_independent=True, time_independent=True, terms=(), name=f"{self.name}@x0")

    def scaled(self, c: float) -> "KernelSpec":
        m = self.m
        terms = tuple((a, _scaled_fn(b, c)) for a, b in self.terms)
        return replace(self, m=lambda t, x, y: c * np.asarray(m(t, x, y)), K_upper=abs(c) * self.K_upper,
                       terms=terms, name=f"{c}*{self.name}")

    def with_alpha(self, alpha: float) -> "KernelSpec":
        return replace(self, alpha=alpha)

    def minus(self, other: "KernelSpec") -> "KernelSpec":
        """Signed difference m - other (no longer a valid jump density, used for remainders)."""
        m1, m2 = self.m, other.m
        terms = ()
        if self.terms and other.x_independent:
            terms = self.terms + ((_one_x, _scaled_fn(lambda t, y: other.m(t, np.zeros(self.d), y), -1.0)),)
        return replace(self, m=lambda t, x, y: np.asarray(m1(t, x, y)) - np.asarray(m2(t, x, y)),
                       x_independent=self.x_independent and other.x_independent,
                       time_independent=self.time_independent and other.time_independent,
                       direction_only=self.direction_only and other.direction_only,
                       terms=terms, angular_breaks=tuple(sorted(set(self.angular_breaks) | set(other.angular_breaks))),
                       name=f"{self.name}-{other.name}")


def _scaled_fn(b, c):
    return lambda t, y: c * np.asarray(b(t, y))


def _one_x(t, x):
    return np.ones(np.shape(x)[:-1])


# ---------------------------------------------------------------- sphere rules

def direction_rule(d: int, n: int = 256):
    """Midpoint directions with weights summing to the sphere measure."""
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    theta = TWO_PI * (np.arange(n) + 0.5) / n
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1), np.full(n, TWO_PI / n)


def _angular_rule(breaks, n_per: int):
    """Gauss-Legendre nodes on [0, 2pi) split at the given angles (broadcast over leading axes).

    Returns nodes and weights arranged so that column j + N/2 is the antipode
    of column j, which lets odd parts cancel pairwise.
    """
    breaks = np.asarray(breaks, dtype=float)
    half = np.mod(breaks, np.pi)
    half = np.concatenate([np.zeros(half.shape[:-1] + (1,)), half, np.full(half.shape[:-1] + (1,), np.pi)], axis=-1)
    half = np.sort(half, axis=-1)
    gx, gw = np.polynomial.legendre.leggauss(n_per)
    # sigmoidal map clustering nodes at segment ends, where |cos|^alpha and jumps of m sit
    u = 0.5 * (gx + 1)
    q = 3.0
    den = u ** q + (1 - u) ** q
    g = u ** q / den
    dg = q * (u * (1 - u)) ** (q - 1) / den ** 2
    a, b = half[..., :-1, None], half[..., 1:, None]
    nodes = ((b - a) * g + a).reshape(half.shape[:-1] + (-1,))
    wts = (0.5 * (b - a) * gw * dg).reshape(nodes.shape)
    return np.concatenate([nodes, nodes + np.pi], axis=-1), np.concatenate([wts, wts], axis=-1)


# ------------------------------------------------------------ nondegeneracy

def check_nondegeneracy(aux: AuxKernelSpec, t: float, alpha: float, n_xi: int = 64, n_sphere: int = 1024) -> float:
    """Estimate eta = min_xi int_S |(w, xi)|^alpha m0(t, w) mu(dw) over unit xi."""
    if n_xi < 8 or n_sphere < 8:
        raise ValueError("n_xi and n_sphere must be at least 8")
    StableIndex(alpha)
    w, mu = direction_rule(aux.d, n_sphere)
    m0 = aux(t, w)
    if np.any(m0 < 0):
        raise AssumptionError("m0 takes negative values")
    if not np.any(m0 > 0):
        raise AssumptionError("m0 vanishes at every sphere node; nondegeneracy fails")
    if aux.d == 1:
        xi = np.array([[1.0], [-1.0]])
    else:
        phi = TWO_PI * np.arange(n_xi) / n_xi
        xi = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    vals = (np.abs(xi @ w.T) ** alpha * m0) @ mu
    return float(vals.min())


# ---------------------------------------------------------- symbol evaluation

@dataclass(frozen=True)
class QuadConfig:
    """Radial-angular quadrature settings for the symbol."""

    r_min: float = 1e-6
    r_max: float = 1e3
    ratio: float = 2.0
    nodes_per_panel: int = 16
    nodes_per_wave: int = 6
    n_theta: int = 32
    method: str = "auto"  # "auto" uses the closed radial form for direction-only kernels
    cancel_tol: float = 1e-8


def compensated_phase(z, chi):
    """e^{iz} - 1 - chi i z, accurate for small |z|."""
    z = np.asarray(z, dtype=float)
    re = -2.0 * np.sin(0.5 * z) ** 2
    small = np.abs(z) < 0.1
    z2 = z * z
    # sin z - z by its Taylor series where cancellation would bite
    sin_minus = np.where(small, -z * z2 / 6 * (1 - z2 / 20 * (1 - z2 / 42 * (1 - z2 / 72))), np.sin(z) - z)
    im = np.where(chi > 0, sin_minus, sin_minus + z)
    return re + 1j * im


def _radial_panels(a: float, b: float, ratio: float):
    if b <= a:
        return np.empty(0), np.empty(0)
    k = max(1, int(np.ceil(np.log(b / a) / np.log(ratio))))
    edges = np.geomspace(a, b, k + 1)
    return edges[:-1], edges[1:]


def _direction_nodes(spec: KernelSpec, xi, quad: QuadConfig):
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if spec.d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    phi = np.arctan2(xi[1], xi[0]) if np.any(xi) else 0.0
    breaks = [phi + np.pi / 2] + list(spec.angular_breaks)
    theta, wt = _angular_rule(np.array(breaks), quad.n_theta)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1), wt


def eval_symbol(spec: KernelSpec, t: float, x, xi, quad: QuadConfig | None = None) -> complex:
    """psi(t, x, xi) = int [e^{i(xi,y)} - 1 - chi(y) i(xi,y)] m(t,x,y) dy/|y|^{d+alpha}."""
    quad = quad or QuadConfig()
    alpha, d = spec.alpha, spec.d
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if xi.shape != (d,):
        raise ValueError(f"xi must have shape ({d},)")
    if radial.is_alpha_one(alpha):
        if not check_alpha1_cancellation(spec, t, x, tol=quad.cancel_tol):
            raise AssumptionError("alpha = 1 kernel fails the ring cancellation; the symbol depends on the cutoff")
    if not np.any(xi):
        return 0j
    w, mu = _direction_nodes(spec, xi, quad)
    s = w @ xi
    half = len(mu) // 2
    if quad.method == "auto" and spec.direction_only:
        mw = spec(t, x, w)
        vals = mu * mw * radial.radial_integral(alpha, s)
        return complex(np.sum(vals[:half] + vals[half:]))
    total = 0j
    pieces = []
    for sj, wj, muj in zip(s, w, mu):
        pieces.append(muj * _radial_line(spec, t, x, wj, sj, quad))
    pieces = np.array(pieces)
    total = np.sum(pieces[:half] + pieces[half:])
    return complex(total)


def _radial_line(spec: KernelSpec, t, x, w, s, quad: QuadConfig) -> complex:
    """int_0^inf [e^{irs} - 1 - chi(r) irs] m(t, x, r w) r^{-1-alpha} dr."""
    alpha = spec.alpha
    if s == 0:
        return 0j
    lo, hi = [], []
    for a_, b_ in ((quad.r_min, min(1.0, quad.r_max)), (max(1.0, quad.r_min), quad.r_max)):
        a1, b1 = _radial_panels(a_, b_, quad.ratio)
        lo.append(a1)
        hi.append(b1)
    lo, hi = np.concatenate(lo), np.concatenate(hi)
    total = 0j
    for a_, b_ in zip(lo, hi):
        waves = abs(s) * (b_ - a_) / TWO_PI
        nn = int(quad.nodes_per_panel + quad.nodes_per_wave * np.ceil(waves))
        gx, gw = np.polynomial.legendre.leggauss(nn)
        r = 0.5 * (b_ - a_) * (gx + 1) + a_
        chi = radial.compensator(alpha, r)
        mvals = spec(t, x, r[:, None] * w)
        integrand = compensated_phase(r * s, chi) * mvals * r ** (-1 - alpha)
        total += 0.5 * (b_ - a_) * np.sum(gw * integrand)
    # [0, r_min]: second-order Taylor with m frozen at r_min
    rm = quad.r_min
    m_lo = float(spec(t, x, rm * w))
    chi_lo = float(radial.compensator(alpha, rm))
    small = -s * s * rm ** (2 - alpha) / (2 * (2 - alpha))
    if chi_lo == 0:
        small = small + 1j * s * rm ** (1 - alpha) / (1 - alpha)
    total += m_lo * small
    # [r_max, inf): exact tail of the oscillatory integral with m frozen at r_max
    R = quad.r_max
    m_hi = float(spec(t, x, R * w))
    e = radial.exp_tail_any(alpha, np.array([abs(s) * R]))[0] * abs(s) ** alpha
    if s < 0:
        e = np.conj(e)
    tail = e - R ** (-alpha) / alpha
    if alpha > 1 and not radial.is_alpha_one(alpha):
        tail = tail - 1j * s * R ** (1 - alpha) / (alpha - 1)
    total += m_hi * tail
    return total


def constant_symbol(alpha: float, d: int, xi_norm):
    """Symbol -c_{d,alpha}|xi|^alpha of the kernel m = 1."""
    return -radial.frac_constant(alpha, d) * np.abs(xi_norm) ** alpha


def check_alpha1_cancellation(spec: KernelSpec, t, x, r_list: Sequence[float] = (0.5, 0.1, 1e-2, 1e-3),
                              tol: float = 1e-8, n_theta: int = 24) -> bool:
    """True iff every ring integral int_{r<|y|<=1/r} y m dy/|y|^{d+1} vanishes within tolerance."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if spec.d == 1:
        w, mu = np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    else:
        theta, mu = _angular_rule(np.array(list(spec.angular_breaks) or [0.0]), n_theta)
        w = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    gx, gw = np.polynomial.legendre.leggauss(24)
    for r in r_list:
        if not 0 < r < 1:
            raise ValueError("ring radii must lie in (0, 1)")
        # substitute u = log|y|, the radial weight |y| * |y|^{-2} * |y|^{d-1} dr/|y|^{d-1} becomes du
        edges = np.linspace(np.log(r), -np.log(r), 2 * int(np.ceil(-np.log(r))) + 3)
        vec = np.zeros(spec.d)
        scale = 0.0
        for a_, b_ in zip(edges[:-1], edges[1:]):
            u = 0.5 * (b_ - a_) * (gx + 1) + a_
            rr = np.exp(u)
            mv = spec(t, x, rr[:, None, None] * w[None, :, :])  # (nu, nw)
            contrib = 0.5 * (b_ - a_) * (gw[:, None] * mv * mu[None, :])
            vec += np.einsum("uw,wd->d", contrib, w)
            scale += np.sum(np.abs(contrib))
        if np.linalg.norm(vec) > tol * max(scale, 1e-300):
            return False
    return True


# ---------------------------------------------------------------- validation

def validate_kernel(spec: KernelSpec, t_list=(0.0, 0.5, 1.0), L: float = np.pi, n_x: int = 16,
                    n_y: int = 64, deltas=None, rng: np.random.Generator | None = None) -> dict:
    """Check the sampled bounds and modulus of continuity; raise AssumptionError on failure."""
    rng = rng or np.random.default_rng(0)
    d = spec.d
    xs = rng.uniform(-L, L, size=(n_x, d))
    radii = np.geomspace(1e-3, 1e2, n_y)
    dirs = rng.normal(size=(n_y, d))
    ys = radii[:, None] * dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    worst_mod = 0.0
    for t in t_list:
        mv = spec(t, xs[:, None, :], ys[None, :, :])
        if np.any(mv < -1e-14) or np.any(mv > spec.K_upper * (1 + 1e-12)):
            raise AssumptionError(f"m leaves [0, K_upper] at t={t}: range [{mv.min()}, {mv.max()}]")
        dist = np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=-1)
        diff = np.abs(mv[:, None, :] - mv[None, :, :]).max(axis=-1)
        bound = np.asarray(spec.modulus_w(dist), dtype=float)
        excess = diff - bound
        np.fill_diagonal(excess, -np.inf)
        worst_mod = max(worst_mod, float(excess.max()))
        if worst_mod > 1e-12:
            raise AssumptionError(f"|m(x)-m(x')| exceeds the modulus w(|x-x'|) by {worst_mod:.3g}")
    deltas = np.geomspace(1.0, 1e-8, 17) if deltas is None else np.asarray(deltas)
    wv = np.asarray(spec.modulus_w(deltas), dtype=float)
    if np.any(np.diff(wv[::-1]) < -1e-15):
        raise AssumptionError("modulus_w must be nondecreasing")
    ratio = wv * deltas ** (-spec.beta)
    if ratio[-1] > 1e-2 * max(ratio[0], 1e-300) and ratio[-1] > 1e-10:
        raise AssumptionError("modulus_w(delta) delta^-beta does not tend to 0")
    if radial.is_alpha_one(spec.alpha):
        for t in t_list:
            for x in xs[:4]:
                if not check_alpha1_cancellation(spec, t, x):
                    raise AssumptionError("alpha = 1 kernel fails the ring cancellation")
    eta = None
    if spec.aux is not None:
        eta = check_nondegeneracy(spec.aux, t_list[0], spec.alpha)
        if eta < spec.eta * (1 - 1e-6):
            raise AssumptionError(f"nondegeneracy estimate {eta} is below the declared eta {spec.eta}")
        for t in t_list:
            m0 = spec.aux(t, ys)
            mv = spec(t, xs[:, None, :], ys[None, :, :])
            if np.any(mv < m0[None, :] - 1e-12):
                raise AssumptionError("m fails to dominate m0")
    return {"max_modulus_excess": worst_mod, "eta_estimate": eta}


def validate_aux(aux: AuxKernelSpec, alpha: float, t_list=(0.0, 1.0), n: int = 512) -> None:
    w, mu = direction_rule(aux.d, n)
    for t in t_list:
        m0 = aux(t, w)
        if np.any(m0 < 0) or np.any(m0 > aux.K_upper * (1 + 1e-12)):
            raise AssumptionError("m0 leaves [0, K_upper]")
        for c in (0.1, 3.0, 250.0):
            if not np.allclose(aux(t, c * w), m0, rtol=0, atol=1e-12):
                raise AssumptionError("m0 is not homogeneous of degree zero")
        if radial.is_alpha_one(alpha):
            first = (m0 * mu) @ w
            if np.linalg.norm(first) > 1e-8 * max(np.sum(m0 * mu), 1e-300):
                raise AssumptionError("alpha = 1 requires a vanishing first sphere moment of m0")


# ------------------------------------------------------------------- presets

def _first_positive(y):
    return (np.asarray(y)[..., 0] > 0).astype(float)


def preset(name: str, alpha: float, d: int = 1, **kw) -> KernelSpec:
    """Builtin kernels: ``constant``, ``half-sphere`` and ``hoelder-mix``."""
    if name == "constant":
        c = float(kw.get("value", 1.0))

        def m(t, x, y):
            return np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]), c)

        aux = AuxKernelSpec(lambda t, w: np.full(np.shape(w)[:-1], c), d, K_upper=c)
        eta = c * radial.sphere_moment(alpha, d)
        return KernelSpec(m, alpha, d, K_upper=c, eta=eta if c > 0 else 0.0, aux=aux, beta=1.0,
                          x_independent=True, direction_only=True,
                          terms=((_one_x, lambda t, y: np.full(np.shape(y)[:-1], c)),),
                          name="constant", params={"value": c})
    if name == "half-sphere":
        def m(t, x, y):
            return np.broadcast_to(_first_positive(y), np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]))

        aux = AuxKernelSpec(lambda t, w: _first_positive(w), d, K_upper=1.0)
        eta = radial.sphere_moment(alpha, d) / 2
        return KernelSpec(m, alpha, d, K_upper=1.0, eta=eta, aux=aux, x_independent=True, direction_only=True,
                          terms=((_one_x, lambda t, y: _first_positive(y)),),
                          angular_breaks=(np.pi / 2, 3 * np.pi / 2) if d == 2 else (), name="half-sphere")
    if name == "hoelder-mix":
        def m(t, x, y):
            x = np.asarray(x)
            return 1.0 + 0.5 * np.sin(x[..., 0]) * _first_positive(y)

        aux = AuxKernelSpec(lambda t, w: np.full(np.shape(w)[:-1], 0.5), d, K_upper=1.5)
        eta = 0.5 * radial.sphere_moment(alpha, d)
        return KernelSpec(m, alpha, d, K_upper=1.5, eta=eta, aux=aux, beta=0.5,
                          modulus_w=lambda dl: 0.5 * np.minimum(np.asarray(dl, dtype=float), 2.0),
                          direction_only=True,
                          terms=((_one_x, lambda t, y: np.ones(np.shape(y)[:-1])),
                                 (lambda t, x: 0.5 * np.sin(np.asarray(x)[..., 0]), lambda t, y: _first_positive(y))),
                          angular_breaks=(np.pi / 2, 3 * np.pi / 2) if d == 2 else (), name="hoelder-mix")
    raise KeyError(f"unknown kernel preset {name!r}")


PRESETS = ("constant", "half-sphere", "hoelder-mix")


# ----------------------------------------------------------- tabulated kernels

def _direction_index(d: int, n_dir: int, y):
    """Linear interpolation weights over direction nodes (d = 1: w = -1, +1)."""
    y = np.asarray(y, dtype=float)
    if d == 1:
        pos = (y[..., 0] > 0).astype(int)
        return pos, pos, np.zeros(pos.shape)
    ang = np.mod(np.arctan2(y[..., 1], y[..., 0]), TWO_PI) / (TWO_PI / n_dir)
    i0 = np.floor(ang).astype(int) % n_dir
    return i0, (i0 + 1) % n_dir, ang - np.floor(ang)


def _x_interp(d: int, L: float, n_x: int, x):
    """Periodic (multi)linear interpolation stencil on an n_x grid over [-L, L)."""
    x = np.asarray(x, dtype=float)
    s = np.mod(x + L, 2 * L) / (2 * L / n_x)
    i0 = np.floor(s).astype(int) % n_x
    return i0, (i0 + 1) % n_x, s - np.floor(s)


def tabulated_kernel(table: np.ndarray, alpha: float, d: int, L: float, K_upper: float | None = None,
                     beta: float = 1.0, name: str = "table", rank_tol: float = 1e-12) -> KernelSpec:
    """Kernel m(x, y) = table[x-node(s), direction node] with linear interpolation.

    ``table`` has shape (n_x,)*d + (n_dir,); in d = 1 the direction axis has
    length 2 (w = -1, +1).  The tabulated function depends on y only through
    its direction, so the kernel is homogeneous of degree zero in y.
    """
    table = np.asarray(table, dtype=float)
    n_x, n_dir = table.shape[0], table.shape[-1]
    if table.shape != (n_x,) * d + (n_dir,) or (d == 1 and n_dir != 2):
        raise ValueError(f"table shape {table.shape} is inconsistent with d={d}")
    if np.any(table < 0):
        raise AssumptionError("tabulated kernel has negative entries")
    K = float(table.max()) if K_upper is None else float(K_upper)

    def interp_x(vals, x):
        i0, i1, f = _x_interp(d, L, n_x, x)
        if d == 1:
            return (1 - f[..., 0])[..., None] * vals[i0[..., 0]] + f[..., 0][..., None] * vals[i1[..., 0]]
        a, b = f[..., 0][..., None], f[..., 1][..., None]
        return ((1 - a) * (1 - b) * vals[i0[..., 0], i0[..., 1]] + a * (1 - b) * vals[i1[..., 0], i0[..., 1]]
                + (1 - a) * b * vals[i0[..., 0], i1[..., 1]] + a * b * vals[i1[..., 0], i1[..., 1]])

    def interp_dir(vec, y):
        j0, j1, g = _direction_index(d, n_dir, y)
        return (1 - g) * vec[..., j0] + g * vec[..., j1] if vec.ndim == 1 else None

    # exact separable form through an SVD of the table
    flat = table.reshape(-1, n_dir)
    U, S, Vt = np.linalg.svd(flat, full_matrices=False)
    keep = S > rank_tol * max(S[0], 1e-300)
    terms = []
    for k in np.nonzero(keep)[0]:
        ux = (U[:, k] * S[k]).reshape((n_x,) * d)
        vk = Vt[k]
        terms.append((_make_x_term(interp_x, ux), _make_y_term(interp_dir, vk)))

    def m(t, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
        row = interp_x(table, np.broadcast_to(x, shape + (d,)))  # (*shape, n_dir)
        j0, j1, g = _direction_index(d, n_dir, np.broadcast_to(y, shape + (d,)))
        r0 = np.take_along_axis(row, j0[..., None], axis=-1)[..., 0]
        r1 = np.take_along_axis(row, j1[..., None], axis=-1)[..., 0]
        return (1 - g) * r0 + g * r1

    x_indep = bool(np.allclose(flat, flat[:1], rtol=0, atol=0))
    # Lipschitz modulus from the largest neighbouring difference of the table
    lip = 0.0
    for ax in range(d):
        lip = max(lip, float(np.abs(np.diff(table, axis=ax, append=np.take(table, [0], axis=ax))).max()) / (2 * L / n_x))
    span = float(table.max() - table.min())
    modulus = (lambda dl: np.minimum(lip * d * np.asarray(dl, dtype=float), span))
    breaks = tuple(TWO_PI * np.arange(n_dir) / n_dir) if d == 2 else ()
    return KernelSpec(m, alpha, d, K_upper=K, beta=beta if lip > 0 else 1.0, modulus_w=modulus,
                      x_independent=x_indep, direction_only=True, terms=tuple(terms), angular_breaks=breaks,
                      name=name, params={"n_x": n_x, "n_dir": n_dir, "L": L})


def _make_x_term(interp_x, ux):
    def a(t, x):
        return interp_x(ux[..., None], np.asarray(x, dtype=float))[..., 0]
    return a


def _make_y_term(interp_dir, vk):
    def b(t, y):
        return interp_dir(vk, np.asarray(y, dtype=float))
    return b


def write_kernel_table(path, table: np.ndarray, *, alpha: float, d: int, L: float, beta: float = 1.0,
                       K_upper: float | None = None) -> None:
    """Write a tabulated kernel as little-endian float64 + sidecar JSON header."""
    from .fieldio import write_array
    header = {"kind": "kernel-table", "alpha": float(alpha), "d": int(d), "L": float(L), "beta": float(beta),
              "K_upper": None if K_upper is None else float(K_upper)}
    write_array(path, np.asarray(table, dtype=float), header)


def load_kernel_table(path, alpha: float | None = None) -> KernelSpec:
    from .fieldio import read_array
    arr, header = read_array(path)
    if header.get("kind") != "kernel-table":
        raise ValueError(f"{path} is not a kernel table")
    a = header["alpha"] if alpha is None else alpha
    return tabulated_kernel(arr, a, header["d"], header["L"], header.get("K_upper"), header.get("beta", 1.0),
                            name=Path(str(path)).stem)


# ---------------------------------------------------------- lower-order terms

@dataclass(frozen=True)
class LowerOrderSpec:
    """Drift b(t, x) plus jump measure pi(t, x, dy) = h(t,x,y) dy/|y|^{d+alpha} + atoms.

    ``atoms`` is a tuple of (y, weight) pairs with y a jump vector.  ``h`` is a
    density relative to the stable measure; ``h_upper`` bounds it (needed for
    simulation by thinning).
    """

    d: int
    b: Callable | None = None
    h: Callable | None = None
    atoms: tuple = ()
    eps0: float = 1.0
    delta0: float = 0.0
    h_upper: float = 0.0
    x_independent: bool = True

    def drift(self, t, x):
        x = np.asarray(x, dtype=float)
        if self.b is None:
            return np.zeros(x.shape)
        return np.broadcast_to(np.asarray(self.b(t, x), dtype=float), x.shape)

    def density(self, t, x, y):
        if self.h is None:
            return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1]))
        return np.asarray(self.h(t, np.asarray(x, dtype=float), np.asarray(y, dtype=float)), dtype=float)

    def atom_rate(self) -> float:
        return float(sum(w for _, w in self.atoms))


def lower_compensator(alpha: float, r):
    """1_{|y|<=1} 1_{alpha>1}, the gradient correction of the lower-order part."""
    r = np.asarray(r, dtype=float)
    if alpha > 1 and not radial.is_alpha_one(alpha):
        return (r <= 1.0).astype(float)
    return np.zeros_like(r)


def density_moment(low: LowerOrderSpec, alpha: float, t, x, r_lo: float, r_hi: float, power: float,
                   n_theta: int = 64) -> float:
    """int_{r_lo<|y|<=r_hi} |y|^power h(t,x,y) dy/|y|^{d+alpha} via log-radial Gauss-Legendre."""
    if low.h is None or r_hi <= r_lo:
        return 0.0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w, mu = direction_rule(low.d, n_theta)
    gx, gw = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(np.log(r_lo), np.log(r_hi), max(2, int(np.ceil(np.log(r_hi / r_lo))) + 1))
    total = 0.0
    for a_, b_ in zip(edges[:-1], edges[1:]):
        u = 0.5 * (b_ - a_) * (gx + 1) + a_
        r = np.exp(u)
        hv = low.density(t, x, r[:, None, None] * w[None])
        total += 0.5 * (b_ - a_) * float(np.sum(gw[:, None] * mu[None] * hv * r[:, None] ** (power - alpha)))
    return total


def validate_lower_order(low: LowerOrderSpec, alpha: float, K_upper: float, t_list=(0.0, 1.0),
                         x_list=None, eps_list=(1e-1, 1e-2, 1e-3, 1e-4)) -> dict:
    """Sampled checks of the drift/jump bounds; raise AssumptionError on failure."""
    d = low.d
    x_list = [np.zeros(d), np.full(d, 1.0), np.full(d, -2.0)] if x_list is None else x_list
    worst = 0.0
    small = []
    for t in t_list:
        for x in x_list:
            # divergence test of the small-jump alpha-moment: deepening the cutoff must not add mass
            m_a = density_moment(low, alpha, t, x, 1e-8, 1e-4, alpha)
            m_b = density_moment(low, alpha, t, x, 1e-14, 1e-4, alpha)
            if m_b - m_a > 1e-6 + 0.05 * abs(m_a):
                raise AssumptionError("the small-jump alpha-moment of pi diverges")
            bx = float(np.linalg.norm(low.drift(t, np.asarray(x, dtype=float))))
            mass = (density_moment(low, alpha, t, x, 1e-14, 1.0, alpha)
                    + density_moment(low, alpha, t, x, 1.0, 1e8, 0.0)
                    + sum(w * min(float(np.linalg.norm(y)) ** alpha, 1.0) for y, w in low.atoms))
            worst = max(worst, bx + mass)
            small.append([density_moment(low, alpha, t, x, 1e-14, e, alpha)
                          + sum(w * float(np.linalg.norm(y)) ** alpha for y, w in low.atoms
                                if float(np.linalg.norm(y)) <= e) for e in eps_list])
    if worst > K_upper * (1 + 1e-9):
        raise AssumptionError(f"|b| + int(|v|^alpha ^ 1) pi(dv) = {worst:.4g} exceeds K_upper = {K_upper}")
    small = np.max(np.asarray(small), axis=0)
    if small[-1] > 1e-6 and small[-1] > 0.5 * small[0]:
        raise AssumptionError("the small-jump moment does not decay as eps -> 0")
    for e in eps_list:
        big = density_moment(low, alpha, 0.0, x_list[0], e, 1e8, 0.0)
        if not np.isfinite(big):
            raise AssumptionError("pi({|v| > eps}) is infinite")
    return {"B_bound": worst, "small_moments": small.tolist()}


def kernel_header(spec: KernelSpec) -> dict:
    """JSON-serializable description used in manifests."""
    return {"name": spec.name, "alpha": spec.alpha, "d": spec.d, "K_upper": spec.K_upper, "eta": spec.eta,
            "beta": spec.beta, "x_independent": spec.x_independent, "direction_only": spec.direction_only,
            "params": json.loads(json.dumps(spec.params, default=float))}
