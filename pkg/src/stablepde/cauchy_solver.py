"""Time stepping for du/dt = (L - lambda) u + f with u(0) = 0 on a periodic grid, plus estimate checks.

Constant kernels are integrated exactly per Fourier mode against a
piecewise-polynomial interpolant of the source.  Variable kernels freeze the
kernel at a reference point, treat the frozen operator exactly and the
remainder (A - frozen A) + B explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import radial
from .grid import (Field, Grid, apply_multiplier, fft, gradient, ifft, lp_norm, spacetime_lp, spatial_axes,
                   time_weights)
from .kernel_model import KernelSpec, LowerOrderSpec
from .singular_integral import OperatorQuad, apply_A, apply_B, frac_multiplier, grid_symbol, kernel_multiplier
from .stable_heat_kernel import HeatKernelTable

SCHEMES = ("duhamel-constant", "imex-frozen")
REFERENCES = ("center", "m0")


class StabilityError(RuntimeError):
    """The explicit remainder is too stiff for the chosen time step."""


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.0
    T: float = 1.0
    n_t: int = 128
    p: float = 2.0
    scheme: str = "duhamel-constant"
    reference: str = "center"
    x_ref: tuple | None = None
    t_ref: float = 0.0
    time_order: int = 3
    step: str = "exponential"
    quad: OperatorQuad | None = None
    check_stability: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.n_t < 2:
            raise ValueError("n_t must be at least 2")
        if self.p < 2:
            raise ValueError("p must be at least 2")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        if self.time_order not in (1, 3):
            raise ValueError("time_order must be 1 or 3")
        if self.step not in ("exponential", "euler"):
            raise ValueError("step must be 'exponential' or 'euler'")

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)


# ------------------------------------------------------------------ phi functions

def phi(k: int, w) -> np.ndarray:
    """phi_k(w) = sum_j w^j / (j + k)!, so phi_0 = exp and phi_{k+1}(w) = (phi_k(w) - 1/k!) / w."""
    w = np.asarray(w, dtype=complex)
    out = np.empty(w.shape, dtype=complex)
    small = np.abs(w) < 1.0
    ws = w[small]
    acc = np.zeros(ws.shape, dtype=complex)
    term = np.full(ws.shape, 1.0 / math.factorial(k), dtype=complex)
    for j in range(40):
        acc += term
        term = term * ws / (j + k + 1)
    out[small] = acc
    wb = w[~small]
    val = np.exp(wb)
    for j in range(k):
        val = (val - 1.0 / math.factorial(j)) / wb
    out[~small] = val
    return out


def _stencils(n_t: int, order: int):
    """Per step n: the node indices used to interpolate the source on [t_n, t_{n+1}]."""
    if order == 1 or n_t < 3:
        return [np.array([n, n + 1]) for n in range(n_t)]
    out = []
    for n in range(n_t):
        j0 = min(max(n - 1, 0), n_t - 3)
        out.append(np.arange(j0, j0 + 4))
    return out


def _source_weights(z, h, offsets):
    """Weights W_i(z) with int_0^h e^{z(h-s)} P(s) ds = sum_i W_i f_i for the interpolant P at t_n + offsets*h."""
    offsets = np.asarray(offsets, dtype=float)
    V = offsets[:, None] ** np.arange(len(offsets))[None, :]
    Vinv = np.linalg.inv(V)
    moments = [h * math.factorial(k) * phi(k + 1, z * h) for k in range(len(offsets))]
    return [sum(Vinv[k, i] * moments[k] for k in range(len(offsets))) for i in range(len(offsets))]


class _SourceIntegrator:
    """Caches source weights per stencil shape for a fixed symbol z."""

    def __init__(self, z, h, n_t, order):
        self.stencils = _stencils(n_t, order)
        self.cache = {}
        self.z, self.h = z, h

    def weights(self, n):
        st = self.stencils[n]
        key = tuple(st - n)
        if key not in self.cache:
            self.cache[key] = _source_weights(self.z, self.h, key)
        return st, self.cache[key]


# ------------------------------------------------------------------ sources

def _check_source(f: Field, cfg: SolverConfig) -> np.ndarray:
    if f.times is None:
        raise ValueError("the source must be time-indexed")
    if len(f.times) != cfg.n_t + 1 or not np.allclose(f.times, cfg.times, rtol=0, atol=1e-12 * cfg.T):
        raise ValueError("source times must equal the solver time grid")
    return f.values


def source_from_function(fun, grid: Grid, cfg: SolverConfig) -> Field:
    """Sample f(t, x) (x of shape (*grid.shape, d)) on the solver's time grid."""
    vals = np.stack([np.broadcast_to(np.asarray(fun(t, grid.points), dtype=float), grid.shape)
                     for t in cfg.times])
    return Field(grid, vals, cfg.times)


def gaussian_pulse(grid: Grid, cfg: SolverConfig, t0: float | None = None, x0=None, width_x: float = 0.5,
                   width_t: float | None = None) -> Field:
    """exp(-|x - x0|^2/(2 wx^2) - (t - t0)^2/(2 wt^2)) with periodic distance in x."""
    t0 = 0.5 * cfg.T if t0 is None else t0
    width_t = 0.2 * cfg.T if width_t is None else width_t
    x0 = np.zeros(grid.d) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))

    def fun(t, x):
        dxv = grid.wrap(x - x0)
        return np.exp(-np.sum(dxv ** 2, axis=-1) / (2 * width_x ** 2) - (t - t0) ** 2 / (2 * width_t ** 2))
    return source_from_function(fun, grid, cfg)


def random_sources(grid: Grid, cfg: SolverConfig, rng: np.random.Generator, size: int = 20, k_max: int = 8,
                   n_time: int = 3) -> list:
    """Random smooth sources built from Fourier modes |k_i| <= k_max and cosines in time.

    The coefficients do not depend on grid.n, so the same seed gives the same
    continuous source on every resolution.
    """
    ks = np.arange(-k_max, k_max + 1)
    if grid.d == 1:
        kv = ks[:, None].astype(float)
    else:
        K1, K2 = np.meshgrid(ks, ks, indexing="ij")
        kv = np.stack([K1.ravel(), K2.ravel()], axis=-1).astype(float)
    decay = (1.0 + np.sum(kv ** 2, axis=-1)) ** -1.0
    out = []
    for _ in range(size):
        c = (rng.standard_normal((n_time, len(kv))) + 1j * rng.standard_normal((n_time, len(kv)))) * decay
        phase = np.exp(1j * np.pi / grid.L * (grid.points @ kv.T))
        spatial = np.real(phase @ c.T)  # (*shape, n_time)
        tb = np.cos(np.pi * np.outer(cfg.times / cfg.T, np.arange(n_time)))  # (n_t+1, n_time)
        vals = np.einsum("tj,...j->t...", tb, spatial)
        out.append(Field(grid, vals, cfg.times))
    return out


# ------------------------------------------------------------------ constant coefficients

def _integrate_modes(z_of_t, f_hat, cfg: SolverConfig, time_independent: bool):
    h = cfg.dt
    n_t = cfg.n_t
    u_hat = np.zeros_like(f_hat, dtype=complex)
    integ = _SourceIntegrator(z_of_t(0.0), h, n_t, cfg.time_order) if time_independent else None
    for n in range(n_t):
        if time_independent:
            z = integ.z
            st, W = integ.weights(n)
        else:
            z = z_of_t((n + 0.5) * h)
            st = _stencils(n_t, cfg.time_order)[n]
            W = _source_weights(z, h, st - n)
        acc = np.exp(z * h) * u_hat[n]
        for j, w in zip(st, W):
            acc = acc + w * f_hat[j]
        u_hat[n + 1] = acc
    return u_hat


def constant_symbol(spec: KernelSpec, t: float, grid: Grid, cfg: SolverConfig) -> np.ndarray:
    """psi(xi) of an x-independent kernel on the grid wavenumbers."""
    return grid_symbol(spec, t, grid, quad=cfg.quad)


def solve_constant(table: HeatKernelTable | None, spec: KernelSpec, f: Field, cfg: SolverConfig) -> Field:
    """Exact per-mode integration of du/dt = (A - lambda) u + f for an x-independent kernel.

    ``table`` only fixes the dimension/index consistency check; the semigroup
    is generated by the kernel's own symbol.
    """
    if not spec.x_independent:
        raise ValueError("solve_constant needs an x-independent kernel")
    grid = f.grid
    if table is not None and (abs(table.alpha - spec.alpha) > 1e-14 or table.d != spec.d):
        raise ValueError("heat kernel table and kernel disagree in alpha or d")
    vals = _check_source(f, cfg)
    f_hat = fft(grid, vals)

    def z_of_t(t):
        return constant_symbol(spec, t, grid, cfg) - cfg.lam
    u_hat = _integrate_modes(z_of_t, f_hat, cfg, spec.time_independent)
    return Field(grid, ifft(grid, u_hat, real=np.isrealobj(vals)), cfg.times)


def mild_solution(table: HeatKernelTable, f: Field, cfg: SolverConfig) -> Field:
    """u(t) = int_0^t e^{-lambda(t-s)} G_{t-s} * f(s) ds in the table's convention."""
    grid = f.grid
    vals = _check_source(f, cfg)
    z = -table.scale * grid.freq_norm ** table.alpha - cfg.lam
    u_hat = _integrate_modes(lambda t: z, fft(grid, vals), cfg, True)
    return Field(grid, ifft(grid, u_hat, real=np.isrealobj(vals)), cfg.times)


# ------------------------------------------------------------------ variable coefficients

def reference_kernel(spec: KernelSpec, cfg: SolverConfig) -> KernelSpec:
    """The frozen kernel m(t_ref, x_ref, y) or the auxiliary kernel m0(t_ref, y)."""
    if cfg.reference == "m0":
        if spec.aux is None:
            raise ValueError("reference 'm0' needs an auxiliary kernel")
        aux, t0 = spec.aux, cfg.t_ref

        def m(t, x, y):
            y = np.asarray(y, dtype=float)
            return np.broadcast_to(aux(t0, y), np.broadcast_shapes(np.shape(x)[:-1], y.shape[:-1]))
        return replace(spec, m=m, x_independent=True, time_independent=True, direction_only=True, terms=(),
                       name=f"{spec.name}:m0")
    x0 = np.zeros(spec.d) if cfg.x_ref is None else np.asarray(cfg.x_ref, dtype=float)
    if spec.x_independent and spec.time_independent:
        return spec
    return spec.frozen(cfg.t_ref, x0)


def _remainder_op(spec, ref, low, cfg):
    zero_rem = ref is spec
    rem = None if zero_rem else spec.minus(ref)

    def R(t, v: Field) -> np.ndarray:
        out = np.zeros(v.values.shape)
        if rem is not None:
            out = out + apply_A(rem, t, v, cfg.quad).values
        if low is not None:
            out = out + apply_B(low, spec.alpha, t, v, quad=cfg.quad).values
        return out
    return R, (rem is None and low is None)


def remainder_radius(spec: KernelSpec, low: LowerOrderSpec | None, grid: Grid, cfg: SolverConfig,
                     iters: int = 12, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral radius of the explicit part (A - frozen A) + B."""
    ref = reference_kernel(spec, cfg)
    R, trivial = _remainder_op(spec, ref, low, cfg)
    if trivial:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(grid.shape)
    est = 0.0
    for _ in range(iters):
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        v = v / nv
        w = R(cfg.t_ref, Field(grid, v))
        est = float(np.linalg.norm(w))
        v = w
    return est


def solve_variable(spec: KernelSpec, low: LowerOrderSpec | None, f: Field, cfg: SolverConfig) -> Field:
    """IMEX stepping: the frozen operator exactly, the remainder and B explicitly.

    With ``cfg.step == "exponential"`` the frozen part and the source are
    integrated exactly per mode and the remainder is held constant over the
    step.  With ``"euler"`` the step is
    u^{n+1} = (1 - dt(psi_ref - lambda))^{-1} [u^n + dt(R u^n + f^n)].
    """
    grid = f.grid
    vals = _check_source(f, cfg)
    ref = reference_kernel(spec, cfg)
    R, trivial = _remainder_op(spec, ref, low, cfg)
    h = cfg.dt
    if cfg.check_stability and not trivial:
        rho = remainder_radius(spec, low, grid, cfg)
        if rho * h > 1.0:
            raise StabilityError(f"explicit remainder radius {rho:.3g} exceeds 1/dt = {1 / h:.3g}")
    z = constant_symbol(ref, cfg.t_ref, grid, cfg) - cfg.lam
    f_hat = fft(grid, vals)
    u = np.zeros(vals.shape)
    if cfg.step == "exponential":
        integ = _SourceIntegrator(z, h, cfg.n_t, cfg.time_order)
        ez = np.exp(z * h)
        p1 = h * phi(1, z * h)
    else:
        denom = 1.0 / (1.0 - h * z)
    u_hat = np.zeros(grid.shape, dtype=complex)
    for n in range(cfg.n_t):
        t = cfg.times[n]
        r_hat = 0.0 if trivial else fft(grid, R(t, Field(grid, u[n])))
        if cfg.step == "exponential":
            st, W = integ.weights(n)
            new = ez * u_hat + p1 * r_hat
            for j, w in zip(st, W):
                new = new + w * f_hat[j]
        else:
            new = denom * (u_hat + h * (r_hat + f_hat[n]))
        u[n + 1] = ifft(grid, new, real=True)
        u_hat = fft(grid, u[n + 1])
        before = np.linalg.norm(u[n])
        if before > 1e-300 and np.linalg.norm(u[n + 1]) > 10 * before + h * np.linalg.norm(vals[n + 1]) * 10:
            raise StabilityError(f"solution norm grew more than tenfold in step {n}")
    return Field(grid, u, cfg.times)


# ------------------------------------------------------------------ residuals and norms

def time_derivative(u: Field) -> np.ndarray:
    """Centered differences inside, second-order one-sided at the ends."""
    return np.gradient(u.values, u.times, axis=0, edge_order=2)


def apply_L(spec: KernelSpec, low: LowerOrderSpec | None, t: float, v: Field, quad=None) -> np.ndarray:
    """Lv with the discrete operator of singular_integral (no splitting)."""
    out = apply_A(spec, t, v, quad).values
    if low is not None:
        out = out + apply_B(low, spec.alpha, t, v, quad=quad).values
    return out


def solver_operator(spec: KernelSpec, low: LowerOrderSpec | None, cfg: SolverConfig, grid: Grid):
    """The operator the time stepper actually integrates: frozen symbol plus explicit remainder."""
    ref = reference_kernel(spec, cfg)
    R, trivial = _remainder_op(spec, ref, low, cfg)
    if ref is spec and not spec.time_independent:
        def Lv(t, v: Field):
            return apply_multiplier(grid, v.values, constant_symbol(spec, t, grid, cfg), real=True)
        return Lv
    sym = constant_symbol(ref, cfg.t_ref, grid, cfg)

    def Lv(t, v: Field):
        out = apply_multiplier(grid, v.values, sym, real=True)
        return out if trivial else out + R(t, v)
    return Lv


def forcing_field(spec: KernelSpec, low: LowerOrderSpec | None, u: Field, f: Field, cfg: SolverConfig) -> Field:
    """F = (L - lambda) u + f slice by slice, with L the solver's operator."""
    grid = u.grid
    Lv = solver_operator(spec, low, cfg, grid)
    vals = np.stack([Lv(t, Field(grid, u.values[k])) - cfg.lam * u.values[k] + f.values[k]
                     for k, t in enumerate(u.times)])
    return Field(grid, vals, u.times)


def residual(spec: KernelSpec, low: LowerOrderSpec | None, u: Field, f: Field, cfg: SolverConfig,
             p: float | None = None) -> float:
    """|du/dt - (L - lambda) u - f|_p / |f|_p in the space-time L_p norm."""
    p = cfg.p if p is None else p
    F = forcing_field(spec, low, u, f, cfg)
    res = time_derivative(u) - F.values
    den = spacetime_lp(u.grid, f.values, u.times, p)
    return spacetime_lp(u.grid, res, u.times, p) / den if den > 0 else spacetime_lp(u.grid, res, u.times, p)


def bessel_multiplier(grid: Grid, beta: float) -> np.ndarray:
    return (1.0 + grid.freq_norm ** 2) ** (beta / 2)


def sobolev_norm(v: Field, beta: float, p: float) -> float:
    """|v|_{beta,p}; time-indexed fields give {int |v(t)|_{beta,p}^p dt}^{1/p}."""
    grid = v.grid
    w = v.values if beta == 0 else apply_multiplier(grid, v.values, bessel_multiplier(grid, beta),
                                                    real=np.isrealobj(v.values))
    if v.times is None:
        return lp_norm(grid, w, p)
    return spacetime_lp(grid, w, v.times, p)


def frac_derivative(v: Field, kappa: float) -> np.ndarray:
    """The rotation invariant kappa-stable generator (multiplier -c|xi|^kappa); kappa = 0 is the identity."""
    if kappa == 0:
        return v.values
    return apply_multiplier(v.grid, v.values, frac_multiplier(v.grid, kappa), real=np.isrealobj(v.values))


def _norm(v: Field, vals, p) -> float:
    if v.times is None:
        return lp_norm(v.grid, vals, p)
    return spacetime_lp(v.grid, vals, v.times, p)


def tilt_source(f: Field, c: float) -> Field:
    """e^{c t} f."""
    return f.with_values(f.values * np.exp(c * f.times).reshape((-1,) + (1,) * f.grid.d))


def tilt_solution(u: Field, c: float) -> Field:
    return tilt_source(u, c)


# ------------------------------------------------------------------ estimate suites

def lem0_sup(v: Field, alpha: float) -> np.ndarray:
    """sup over lattice shifts y != 0 of |v(x+y) - v(x) - chi(y)(grad v, y)| / |y|^alpha."""
    grid = v.grid
    vals = v.values
    g = gradient(grid, vals)
    n, dx = grid.n, grid.dx
    best = np.zeros(grid.shape)
    offs = np.arange(n)
    offs = np.where(offs > n // 2, offs - n, offs)
    if grid.d == 1:
        shifts = [(k,) for k in offs if k != 0]
    else:
        shifts = [(a, b) for a in offs for b in offs if (a, b) != (0, 0)]
    for s in shifts:
        y = dx * np.asarray(s, dtype=float)
        r = float(np.linalg.norm(y))
        moved = np.roll(vals, tuple(-k for k in s), axis=tuple(range(grid.d)))
        diff = moved - vals
        if float(radial.compensator(alpha, r)) > 0:
            diff = diff - g @ y
        np.maximum(best, np.abs(diff) / r ** alpha, out=best)
    return best


def lem0_ratio(v: Field, alpha: float, p: float) -> float:
    """|sup_y |nabla_y v| / |y|^alpha|_p / |d^alpha v|_p for a single slice."""
    den = lp_norm(v.grid, frac_derivative(v, alpha), p)
    return lp_norm(v.grid, lem0_sup(v, alpha), p) / den if den > 0 else 0.0


def solve(spec, low, f, cfg, table=None) -> Field:
    if cfg.scheme == "duhamel-constant":
        if low is not None:
            raise ValueError("duhamel-constant does not support lower-order terms")
        return solve_constant(table, spec, f, cfg)
    return solve_variable(spec, low, f, cfg)


def apriori_ratios(u: Field, f: Field, alpha: float, p: float) -> dict:
    dt_u = Field(u.grid, time_derivative(u), u.times)
    num = _norm(dt_u, dt_u.values, p) + sobolev_norm(u, alpha, p)
    fn = _norm(f, f.values, p)
    return {"R1": num / fn, "u_p": _norm(u, u.values, p), "f_p": fn}


def lambda_sweep(spec, low, ensemble, cfg: SolverConfig, decades=(1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3),
                 factors=(1, 2, 4, 8, 16), plateau_tol: float = 0.1, table=None) -> dict:
    """R2(lambda) = max over the ensemble of lambda |u|_p / |f|_p on decades, then above the plateau."""
    def R2(lam):
        c = replace(cfg, lam=float(lam))
        best = 0.0
        for f in ensemble:
            u = solve(spec, low, f, c, table)
            best = max(best, lam * _norm(u, u.values, cfg.p) / _norm(f, f.values, cfg.p))
        return best
    dec = [(float(l), R2(l)) for l in decades]
    lam1 = dec[-1][0]
    for (l0, r0), (_, r1) in zip(dec[:-1], dec[1:]):
        if r0 > 0 and abs(r1 - r0) <= plateau_tol * r0:
            lam1 = l0
            break
    sweep = [(lam1 * k, R2(lam1 * k)) for k in factors]
    vals = [r for _, r in sweep]
    return {"decades": dec, "lambda1": lam1, "sweep": sweep, "bounded": bool(max(vals) <= 1.0 + 1e-9),
            "nonincreasing": bool(all(b <= a for a, b in zip(vals[:-1], vals[1:])))}


def verify_apriori(spec, low, cfg: SolverConfig, ensemble, table=None, sweep: bool = True) -> dict:
    """Max estimate ratios over an ensemble of sources."""
    if len(ensemble) < 1:
        raise ValueError("empty ensemble")
    R1, lem0, running = 0.0, 0.0, []
    for f in ensemble:
        u = solve(spec, low, f, cfg, table)
        R1 = max(R1, apriori_ratios(u, f, spec.alpha, cfg.p)["R1"])
        lem0 = max(lem0, lem0_ratio(Field(u.grid, u.values[-1]), spec.alpha, cfg.p))
        running.append(R1)
    rep = {"R1": R1, "R1_running": running, "lem0": lem0, "n": u.grid.n, "p": cfg.p, "lambda": cfg.lam,
           "ensemble_size": len(ensemble)}
    if sweep:
        rep["lambda_sweep"] = lambda_sweep(spec, low, ensemble, cfg, table=table)
    return rep


def holder_exponent(alpha: float, d: int, p: float) -> float:
    return alpha / 2 - d / p


def holder_seminorm(u: Field, beta: float) -> float:
    """sup over times and lattice pairs |x - x'| >= dx of |u(x) - u(x')| / |x - x'|^beta (torus distance)."""
    grid = u.grid
    vals = u.values if u.times is not None else u.values[None]
    n, dx = grid.n, grid.dx
    offs = np.arange(n)
    offs = np.where(offs > n // 2, offs - n, offs)
    best = 0.0
    axes = tuple(range(1, grid.d + 1))
    if grid.d == 1:
        shifts = [(k,) for k in offs if k > 0]
    else:
        shifts = [(a, b) for a in offs for b in offs if (a, b) != (0, 0)]
    for s in shifts:
        r = dx * float(np.linalg.norm(s))
        moved = np.roll(vals, tuple(-k for k in s), axis=axes)
        best = max(best, float(np.max(np.abs(moved - vals))) / r ** beta)
    return best


def time_regularity(u: Field, alpha: float, p: float, f: Field | None = None, kappa: float = 0.5,
                    levels: int = 5, per_level: int = 4) -> dict:
    """max over dyadic pairs s < t of |d^{alpha(1-kappa)}[u(t) - u(s)]|_p / ((t-s)^{kappa-1/p} (|f|_p + |d^alpha u|_p))."""
    times = u.times
    T = times[-1] - times[0]
    n_t = len(times) - 1
    fn = _norm(u, time_derivative(u), p) if f is None else _norm(f, f.values, p)
    rhs = fn + _norm(u, frac_derivative(u, alpha), p)
    best, rows = 0.0, []
    for j in range(1, levels + 1):
        step = n_t // 2 ** j
        if step < 1:
            break
        for i in range(min(per_level, 2 ** j)):
            a, b = i * step, (i + 1) * step
            diff = Field(u.grid, u.values[b] - u.values[a])
            lhs = lp_norm(u.grid, frac_derivative(diff, alpha * (1 - kappa)), p)
            ratio = lhs / ((times[b] - times[a]) ** (kappa - 1 / p) * rhs) if rhs > 0 else 0.0
            rows.append((float(times[a]), float(times[b]), ratio))
            best = max(best, ratio)
    return {"ratio": best, "pairs": rows}


def holder_embedding_check(u: Field, cfg: SolverConfig, alpha: float, f: Field | None = None) -> dict:
    """Sup norm plus beta-Hoelder seminorm against |u|_{alpha,p} + |du/dt|_p, and the time-regularity ratio."""
    d, p = u.grid.d, cfg.p
    if not (p > 2 and p > 2 * d / alpha):
        raise ValueError(f"need p > 2 and p > 2d/alpha, got p = {p}, d = {d}, alpha = {alpha}")
    beta = holder_exponent(alpha, d, p)
    sup = float(np.max(np.abs(u.values)))
    semi = holder_seminorm(u, beta)
    dtu = time_derivative(u)
    norm = sobolev_norm(u, alpha, p) + _norm(u, dtu, p)
    tr = time_regularity(u, alpha, p, f)
    return {"beta": beta, "sup": sup, "seminorm": semi, "norm": norm,
            "ratio": (sup + semi) / norm if norm > 0 else 0.0, "time_ratio": tr["ratio"], "time_pairs": tr["pairs"]}
