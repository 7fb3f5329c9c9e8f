"""Monte Carlo simulation of stable-like jump processes and statistical checks of their generator.

Jumps larger than ``eps_cut`` are proposed from the dominating measure
K dy/|y|^{d+alpha} and accepted with probability m(t, X, y)/K.  Smaller jumps
are replaced by their first-order compensation (alpha > 1) and, optionally,
by a Gaussian with matching covariance.  Random numbers come from Philox
streams keyed by (seed, block index) so results do not depend on how blocks
are scheduled.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from . import radial
from .cauchy_solver import SolverConfig, solve_constant, solve_variable
from .grid import Field, Grid, SpectralInterpolator, spacetime_lp
from .kernel_model import KernelSpec, LowerOrderSpec, _angular_rule
from .singular_integral import apply_A, apply_B


# ------------------------------------------------------------------ stable samplers

def _positive_stable(beta: float, rng: np.random.Generator, size) -> np.ndarray:
    """Positive beta-stable variables with Laplace transform exp(-s^beta), 0 < beta < 1 (Kanter)."""
    U = rng.uniform(0.0, np.pi, size)
    E = rng.standard_exponential(size)
    return (np.sin(beta * U) / np.sin(U) ** (1 / beta)) * (np.sin((1 - beta) * U) / E) ** ((1 - beta) / beta)


def sample_symmetric_stable(alpha: float, dt: float, rng: np.random.Generator, d: int = 1, size=None,
                            scale: float = 1.0) -> np.ndarray:
    """Increments with characteristic function exp(-dt * scale * |xi|^alpha), shape (*size, d).

    d = 1 uses the Chambers-Mallows-Stuck formula; d = 2 writes the
    isotropic law as sqrt(A) times a Gaussian with A positive alpha/2-stable.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    size = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    s = (dt * scale) ** (1 / alpha)
    if d == 1:
        V = rng.uniform(-np.pi / 2, np.pi / 2, size)
        W = rng.standard_exponential(size)
        if radial.is_alpha_one(alpha):
            X = np.tan(V)
        else:
            X = (np.sin(alpha * V) / np.cos(V) ** (1 / alpha)
                 * (np.cos((1 - alpha) * V) / W) ** ((1 - alpha) / alpha))
        return s * X[..., None]
    A = _positive_stable(alpha / 2, rng, size)
    G = rng.standard_normal(size + (d,)) * np.sqrt(2.0)
    return s * np.sqrt(A)[..., None] * G


# ------------------------------------------------------------------ configuration and ensembles

@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 10_000
    seed: int = 0
    dt: float = 1e-3
    T: float = 1.0
    eps_cut: float = 0.05
    gaussian_correction: bool = False
    block_size: int = 4096
    store_paths: bool = True
    max_log: int = 200_000

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.dt <= 0 or self.eps_cut <= 0:
            raise ValueError("dt and eps_cut must be positive")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class PathEnsemble:
    n_paths: int
    seed: int
    times: np.ndarray
    X: np.ndarray | None
    jump_path: np.ndarray
    jump_time: np.ndarray
    jump_size: np.ndarray
    eps_cut: float
    alpha: float
    integrals: dict = field(default_factory=dict)
    final: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def digest(self) -> str:
        """sha256 over trajectories, the jump log and accumulated integrals."""
        h = hashlib.sha256()
        for arr in (self.times, self.X if self.X is not None else self.final, self.jump_path, self.jump_time,
                    self.jump_size):
            h.update(np.ascontiguousarray(arr).tobytes())
        for k in sorted(self.integrals):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.integrals[k]).tobytes())
        return h.hexdigest()

    def summary(self) -> dict:
        return {"n_paths": self.n_paths, "seed": self.seed, "eps_cut": self.eps_cut, "alpha": self.alpha,
                "n_steps": len(self.times) - 1, "n_logged_jumps": int(len(self.jump_time)), "digest": self.digest()}


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _sphere_area(d: int) -> float:
    return 2.0 if d == 1 else 2 * np.pi


def _direction_nodes(d: int, breaks=(), n_per: int = 16):
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    th, wt = _angular_rule(breaks, n_per)
    return np.stack([np.cos(th), np.sin(th)], axis=-1), wt


def _radial_rule(a: float, b: float, n_per: int = 12):
    """Gauss-Legendre in log r on [a, b]."""
    gx, gw = np.polynomial.legendre.leggauss(n_per)
    k = max(1, int(np.ceil(np.log(b / a) / np.log(4.0))))
    e = np.linspace(np.log(a), np.log(b), k + 1)
    u = (0.5 * (e[1:] - e[:-1])[:, None] * (gx + 1) + e[:-1, None]).ravel()
    w = (0.5 * (e[1:] - e[:-1])[:, None] * gw).ravel()
    return np.exp(u), w


class _Moments:
    """First and second jump moments of a kernel outside/inside the cutoff at given points.

    drift(t, X)  = int_{|y|>eps} chi(y) y m(t,X,y) dy/|y|^{d+alpha}  (subtracted)
    cov(t, X)    = int_{|y|<=eps} y y^T m(t,X,y) dy/|y|^{d+alpha}
    """

    def __init__(self, mfun, alpha, d, eps, breaks=(), direction_only=True, chi_upper=np.inf):
        self.mfun, self.alpha, self.d, self.eps = mfun, alpha, d, eps
        self.W, self.mu = _direction_nodes(d, breaks)
        self.direction_only = direction_only
        self.chi_upper = chi_upper
        if direction_only:
            if chi_upper == np.inf:
                self.r1 = eps ** (1 - alpha) / (alpha - 1) if alpha > 1 else 0.0
            else:
                self.r1 = (np.log(chi_upper / eps) if radial.is_alpha_one(alpha)
                           else (eps ** (1 - alpha) - chi_upper ** (1 - alpha)) / (alpha - 1)) if chi_upper > eps else 0.0
            self.r2 = eps ** (2 - alpha) / (2 - alpha)
            self.nodes = None
        else:
            hi = 1e6 if chi_upper == np.inf else chi_upper
            self.out_r, self.out_w = _radial_rule(eps, hi) if hi > eps else (np.zeros(0), np.zeros(0))
            self.in_r, self.in_w = _radial_rule(eps * 1e-10, eps)

    def _m_dirs(self, t, X, r=None):
        # m at (X_i, r w_j): shape (n, n_dir) or (n, n_r, n_dir)
        if r is None:
            y = self.W[None, :, :]
            return self.mfun(t, X[:, None, :], y)
        y = r[:, None, None] * self.W[None, :, :]
        return self.mfun(t, X[:, None, None, :], y[None])

    def drift(self, t, X):
        if self.direction_only:
            if self.r1 == 0.0:
                return np.zeros(X.shape)
            m = self._m_dirs(t, X)
            return self.r1 * np.einsum("nj,j,ja->na", m, self.mu, self.W)
        if len(self.out_r) == 0:
            return np.zeros(X.shape)
        m = self._m_dirs(t, X, self.out_r)  # (n, n_r, n_dir)
        wr = self.out_w * self.out_r ** (1 - self.alpha)
        return np.einsum("nrj,r,j,ja->na", m, wr, self.mu, self.W)

    def cov(self, t, X):
        if self.direction_only:
            m = self._m_dirs(t, X)
            return self.r2 * np.einsum("nj,j,ja,jb->nab", m, self.mu, self.W, self.W)
        m = self._m_dirs(t, X, self.in_r)
        wr = self.in_w * self.in_r ** (2 - self.alpha)
        return np.einsum("nrj,r,j,ja,jb->nab", m, wr, self.mu, self.W, self.W)


def _gaussian_step(cov, rng, dt):
    """Gaussian increments with covariance cov*dt; cov of shape (n, d, d)."""
    n, d = cov.shape[0], cov.shape[1]
    Z = rng.standard_normal((n, d))
    if d == 1:
        return np.sqrt(np.maximum(cov[:, 0, 0], 0) * dt)[:, None] * Z
    a, b, c = cov[:, 0, 0], cov[:, 0, 1], cov[:, 1, 1]
    l11 = np.sqrt(np.maximum(a, 0))
    l21 = np.where(l11 > 0, b / np.where(l11 > 0, l11, 1), 0)
    l22 = np.sqrt(np.maximum(c - l21 ** 2, 0))
    s = np.sqrt(dt)
    return s * np.stack([l11 * Z[:, 0], l21 * Z[:, 0] + l22 * Z[:, 1]], axis=-1)


class DominationError(ValueError):
    """The kernel exceeds its declared upper bound, so thinning is invalid."""


def simulate(spec: KernelSpec | None, low: LowerOrderSpec | None, alpha: float, s0: float, x0, cfg: MCConfig,
             observers: dict | None = None) -> PathEnsemble:
    """Euler scheme with thinned big jumps; ``observers`` maps names to g(t, X) integrated along paths.

    Each observer g is integrated over [s0, T] by the trapezoid rule on the
    step grid; the per-path integrals are stored in ``ensemble.integrals``.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = len(x0)
    n_steps = max(1, int(round((cfg.T - s0) / cfg.dt)))
    dt = (cfg.T - s0) / n_steps
    times = s0 + dt * np.arange(n_steps + 1)
    observers = observers or {}
    K = spec.K_upper if spec is not None else 0.0
    eps = cfg.eps_cut
    rate = K * _sphere_area(d) * eps ** (-alpha) / alpha
    hi = alpha > 1 and not radial.is_alpha_one(alpha)
    breaks = spec.angular_breaks if spec is not None else ()
    mom = None
    if spec is not None and (hi or cfg.gaussian_correction):
        mom = _Moments(lambda t, x, y: spec(t, x, y), alpha, d, eps, breaks, spec.direction_only)
    low_rate = 0.0
    low_mom = None
    if low is not None:
        if low.h is not None:
            low_rate = low.h_upper * _sphere_area(d) * eps ** (-alpha) / alpha
            if hi:
                low_mom = _Moments(lambda t, x, y: low.density(t, x, y), alpha, d, eps, (),
                                   direction_only=False, chi_upper=1.0)
        atoms = [(np.atleast_1d(np.asarray(y, dtype=float)), float(w)) for y, w in low.atoms]
    else:
        atoms = []
    store = cfg.store_paths
    X_all = np.empty((cfg.n_paths, n_steps + 1, d)) if store else None
    final = np.empty((cfg.n_paths, d))
    integ = {k: np.zeros(cfg.n_paths) for k in observers}
    logs_p, logs_t, logs_y = [], [], []
    n_logged = 0
    for b0 in range(0, cfg.n_paths, cfg.block_size):
        b1 = min(cfg.n_paths, b0 + cfg.block_size)
        nb = b1 - b0
        rng = block_rng(cfg.seed, b0 // cfg.block_size)
        X = np.broadcast_to(x0, (nb, d)).copy()
        if store:
            X_all[b0:b1, 0] = X
        acc = {k: 0.5 * dt * np.asarray(g(times[0], X), dtype=float) for k, g in observers.items()}
        for s in range(n_steps):
            t = times[s]
            inc = np.zeros((nb, d))
            if mom is not None:
                if hi:
                    inc -= mom.drift(t, X) * dt
                if cfg.gaussian_correction:
                    inc += _gaussian_step(mom.cov(t, X), rng, dt)
            if low is not None:
                if hi and low.b is not None:
                    inc += low.drift(t, X) * dt
                if low_mom is not None:
                    inc -= low_mom.drift(t, X) * dt
                for y0, w in atoms:
                    if hi and np.linalg.norm(y0) <= 1.0:
                        inc -= w * y0 * dt
            # thinned big jumps of the principal part
            for (rt, upper, mf) in ((rate, K, None if spec is None else spec),
                                    (low_rate, low.h_upper if low is not None else 0.0,
                                     None if low is None or low.h is None else "low")):
                if rt <= 0:
                    continue
                N = rng.poisson(rt * dt, nb)
                tot = int(N.sum())
                if tot == 0:
                    continue
                owner = np.repeat(np.arange(nb), N)
                r = eps * rng.uniform(size=tot) ** (-1.0 / alpha)
                if d == 1:
                    w = np.where(rng.uniform(size=tot) < 0.5, -1.0, 1.0)[:, None]
                else:
                    th = rng.uniform(0, 2 * np.pi, tot)
                    w = np.stack([np.cos(th), np.sin(th)], axis=-1)
                y = r[:, None] * w
                u = rng.uniform(size=tot)
                tj = t + dt * rng.uniform(size=tot)
                if mf == "low":
                    mv = low.density(t, X[owner], y)
                else:
                    mv = mf(t, X[owner], y)
                if np.any(mv > upper * (1 + 1e-12)) or np.any(mv < -1e-12):
                    raise DominationError("acceptance probability outside [0, 1]: kernel exceeds its bound")
                keep = u * upper < mv
                if np.any(keep):
                    np.add.at(inc, owner[keep], y[keep])
                    if n_logged < cfg.max_log:
                        take = min(int(keep.sum()), cfg.max_log - n_logged)
                        logs_p.append((owner[keep] + b0)[:take])
                        logs_t.append(tj[keep][:take])
                        logs_y.append(y[keep][:take])
                        n_logged += take
            for y0, wt in atoms:
                N = rng.poisson(wt * dt, nb)
                if N.any():
                    inc += N[:, None] * y0[None, :]
            X = X + inc
            if store:
                X_all[b0:b1, s + 1] = X
            wgt = 0.5 * dt if s + 1 == n_steps else dt
            for k, g in observers.items():
                acc[k] += wgt * np.asarray(g(times[s + 1], X), dtype=float)
        final[b0:b1] = X
        for k in observers:
            integ[k][b0:b1] = acc[k]
    if logs_t:
        jp, jt, jy = np.concatenate(logs_p), np.concatenate(logs_t), np.concatenate(logs_y)
    else:
        jp, jt, jy = np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, d))
    return PathEnsemble(cfg.n_paths, cfg.seed, times, X_all, jp.astype(np.int64), jt, jy, eps, alpha, integ, final,
                        {"dt": dt, "gaussian_correction": cfg.gaussian_correction, "rate": rate})


# ------------------------------------------------------------------ statistics helpers

def mean_se(x) -> tuple:
    """Mean and standard error with compensated summation."""
    x = np.asarray(x, dtype=float).ravel()
    n = len(x)
    mean = math.fsum(x) / n
    var = math.fsum((x - mean) ** 2) / max(n - 1, 1)
    return mean, math.sqrt(var / n)


def ks_stable(samples, alpha: float, table, t: float = 1.0) -> float:
    """One-sample KS p-value of 1D samples against the tabulated stable CDF at time t."""
    from .stable_heat_kernel import cdf_1d
    return float(stats.kstest(np.asarray(samples).ravel(), lambda x: cdf_1d(table, x, t)).pvalue)


def ks_stable_radial(samples, table, t: float = 1.0) -> float:
    """KS p-value of |X| for d-dimensional samples against the radial CDF of G_t."""
    from .stable_heat_kernel import radial_cdf
    te = t * table.scale
    r = np.linalg.norm(np.asarray(samples).reshape(-1, table.d), axis=-1) * te ** (-1 / table.alpha)
    return float(stats.kstest(r, lambda z: radial_cdf(table, z)).pvalue)


def ring_counts(ens: PathEnsemble, spec: KernelSpec, rings, T: float | None = None) -> list:
    """Observed vs expected accepted jumps per ring {r1 < |y| < r2} for an x-independent kernel."""
    T = (ens.times[-1] - ens.times[0]) if T is None else T
    r = np.linalg.norm(ens.jump_size, axis=-1)
    W, mu = _direction_nodes(spec.d, spec.angular_breaks, 64)
    x0 = np.zeros(spec.d)
    out = []
    for r1, r2 in rings:
        rr, wr = _radial_rule(r1, r2)
        m = spec(0.0, x0, rr[:, None, None] * W[None])
        mass = float(np.sum(wr[:, None] * rr[:, None] ** (-ens.alpha) * mu[None] * m))
        expect = mass * T * ens.n_paths
        obs = int(np.sum((r > r1) & (r < r2)))
        out.append({"r1": r1, "r2": r2, "observed": obs, "expected": expect,
                    "z": (obs - expect) / math.sqrt(expect) if expect > 0 else 0.0})
    return out


# ------------------------------------------------------------------ martingale test

def bump(grid: Grid, center=None, width: float = 0.5) -> Field:
    center = np.zeros(grid.d) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    r2 = np.sum(grid.wrap(grid.points - center) ** 2, axis=-1)
    return Field(grid, np.exp(-r2 / (2 * width ** 2)))


@dataclass
class MartingaleTest:
    functions: list
    confidence: float = 0.99
    levels: int = 2

    def __post_init__(self):
        for v in self.functions:
            edge = np.concatenate([np.abs(np.take(v.values, 0, axis=a)).ravel() for a in range(v.grid.d)])
            if edge.max() > 1e-8 * max(1.0, np.abs(v.values).max()):
                raise ValueError("test functions must decay below 1e-8 at the torus boundary")


def dyadic_pairs(times, levels: int):
    n = len(times) - 1
    out = []
    for j in range(levels + 1):
        k = 2 ** j
        if n % k:
            continue
        step = n // k
        out.extend((i * step, (i + 1) * step) for i in range(k))
    return out


def _generator_fields(v: Field, spec, low, alpha, times):
    spec = spec.with_alpha(alpha) if spec is not None and spec.alpha != alpha else spec
    cache = {}
    vals = []
    for t in times:
        key = None if (spec is None or spec.time_independent) else float(t)
        if key not in cache:
            out = np.zeros(v.grid.shape)
            if spec is not None:
                out = out + apply_A(spec, float(t), v).values
            if low is not None:
                out = out + apply_B(low, alpha, float(t), v).values
            cache[key] = SpectralInterpolator(v.grid, out)
        vals.append(cache[key])
    return vals


def martingale_residual(ens: PathEnsemble, test: MartingaleTest, spec: KernelSpec | None,
                        low: LowerOrderSpec | None, alpha: float) -> dict:
    """CLT intervals for E[M_t(v) - M_s(v)] on dyadic pairs with a Bonferroni correction."""
    if ens.X is None:
        raise ValueError("the ensemble does not store trajectories")
    pairs = dyadic_pairs(ens.times, test.levels)
    n_tests = len(pairs) * len(test.functions)
    z = float(stats.norm.ppf(1 - (1 - test.confidence) / (2 * n_tests)))
    if ens.n_paths < 30:
        raise ValueError("too few paths for a CLT interval")
    dt = np.diff(ens.times)
    rows = []
    for iv, v in enumerate(test.functions):
        vi = SpectralInterpolator(v.grid, v.values)
        Lv = _generator_fields(v, spec, low, alpha, ens.times)
        Xt = ens.X
        vX = np.stack([vi(Xt[:, k]) for k in range(Xt.shape[1])], axis=1)
        LX = np.stack([Lv[k](Xt[:, k]) for k in range(Xt.shape[1])], axis=1)
        cum = np.concatenate([np.zeros((ens.n_paths, 1)), np.cumsum(0.5 * dt * (LX[:, 1:] + LX[:, :-1]), axis=1)],
                             axis=1)
        for a, b in pairs:
            inc = vX[:, b] - vX[:, a] - (cum[:, b] - cum[:, a])
            mean, se = mean_se(inc)
            rows.append({"function": iv, "s": float(ens.times[a]), "t": float(ens.times[b]), "mean": mean,
                         "se": se, "covers_zero": bool(abs(mean) <= z * se)})
    return {"z": z, "confidence": test.confidence, "n_tests": n_tests, "rows": rows,
            "all_cover": bool(all(r["covers_zero"] for r in rows)),
            "any_reject": bool(any(not r["covers_zero"] for r in rows))}


# ------------------------------------------------------------------ Feynman-Kac

def reflect_time(spec: KernelSpec, T: float) -> KernelSpec:
    """The kernel with t replaced by T - t."""
    if spec.time_independent:
        return spec
    m = spec.m
    terms = tuple((lambda t, x, a=a: a(T - t, x), lambda t, y, b=b: b(T - t, y)) for a, b in spec.terms)
    return replace(spec, m=lambda t, x, y: m(T - t, x, y), terms=terms, name=f"{spec.name}:reflected")


def reflect_lower(low: LowerOrderSpec | None, T: float):
    if low is None:
        return None
    b, h = low.b, low.h
    return replace(low, b=None if b is None else (lambda t, x: b(T - t, x)),
                   h=None if h is None else (lambda t, x, y: h(T - t, x, y)))


def backward_solution(spec, low, f: Field, cfg: SolverConfig) -> Field:
    """u solving du/dt + (L - lambda) u = f, u(T) = 0, by solving the time-reflected forward problem."""
    T = cfg.T
    g = Field(f.grid, -f.values[::-1], cfg.times)
    spec_r = reflect_time(spec, T)
    low_r = reflect_lower(low, T)
    if spec.x_independent and low is None:
        w = solve_constant(None, spec_r, g, cfg)
    else:
        w = solve_variable(spec_r, low_r, g, replace(cfg, scheme="imex-frozen"))
    return Field(f.grid, w.values[::-1].copy(), cfg.times)


def _interp_in_time(f: Field):
    interps = [SpectralInterpolator(f.grid, f.values[k]) for k in range(len(f.times))]
    times = f.times

    def g(t, X):
        k = int(np.clip(np.searchsorted(times, t) - 1, 0, len(times) - 2))
        th = (t - times[k]) / (times[k + 1] - times[k])
        return (1 - th) * interps[k](X) + th * interps[k + 1](X)
    return g


def _solution_at(u: Field, s0: float, x0) -> float:
    k = int(np.argmin(np.abs(u.times - s0)))
    if abs(u.times[k] - s0) > 1e-12:
        raise ValueError("s0 must lie on the solver time grid")
    return float(SpectralInterpolator(u.grid, u.values[k])(np.atleast_1d(x0)[None, :])[0])


def feynman_kac_check(spec, low, alpha: float, f: Field, s0: float, x0, cfg: MCConfig,
                      solver_cfg: SolverConfig, refine: bool = True) -> dict:
    """Compare -u(s0, x0) from the backward PDE with the MC mean of int_{s0}^T f(r, X_r) dr."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if solver_cfg.lam != 0:
        raise ValueError("the Feynman-Kac comparison uses lambda = 0")
    u = backward_solution(spec, low, f, solver_cfg)
    pde = -_solution_at(u, s0, x0)
    pde_err = 0.0
    if refine:
        fine = replace(solver_cfg, n_t=2 * solver_cfg.n_t)
        f_fine = _refine_source_in_time(f, fine)
        u2 = backward_solution(spec, low, f_fine, fine)
        pde_err = abs(-_solution_at(u2, s0, x0) - pde)
    ens = simulate(spec, low, alpha, s0, x0, replace(cfg, T=solver_cfg.T, store_paths=False),
                   observers={"f": _interp_in_time(f)})
    mc, se = mean_se(ens.integrals["f"])
    comb = math.sqrt(se ** 2 + pde_err ** 2)
    return {"pde": pde, "pde_refinement_error": pde_err, "mc": mc, "mc_se": se, "combined_se": comb,
            "difference": mc - pde, "agree": bool(abs(mc - pde) <= 3 * comb), "n_paths": cfg.n_paths,
            "dt": ens.meta["dt"], "eps_cut": cfg.eps_cut, "digest": ens.digest()}


def _refine_source_in_time(f: Field, cfg: SolverConfig) -> Field:
    """Linear interpolation of f to the finer time grid (exact at the shared nodes)."""
    vals = np.empty((cfg.n_t + 1,) + f.grid.shape)
    for k, t in enumerate(cfg.times):
        j = int(np.clip(np.searchsorted(f.times, t) - 1, 0, len(f.times) - 2))
        th = (t - f.times[j]) / (f.times[j + 1] - f.times[j])
        vals[k] = (1 - th) * f.values[j] + th * f.values[j + 1]
    return Field(f.grid, vals, cfg.times)


def occupation_ratios(spec, low, alpha: float, sources, s0: float, x0, cfg: MCConfig, p: float) -> dict:
    """|MC mean of int f(r, X_r) dr| / |f|_p for each source."""
    ratios = []
    for k, f in enumerate(sources):
        ens = simulate(spec, low, alpha, s0, x0, replace(cfg, store_paths=False, T=float(f.times[-1]),
                                                         seed=cfg.seed + k),
                       observers={"f": _interp_in_time(f)})
        mc, _ = mean_se(ens.integrals["f"])
        ratios.append(abs(mc) / spacetime_lp(f.grid, f.values, f.times, p))
    return {"ratios": ratios, "max": max(ratios), "min": min(ratios)}
