"""Acceptance criteria 1-9; each test records one pass/fail line shown in the terminal summary."""

import filecmp
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from stablepde import radial
from stablepde.cauchy_solver import (SolverConfig, gaussian_pulse, holder_embedding_check, random_sources, residual,
                                     solve_constant, solve_variable, source_from_function, tilt_solution, tilt_source,
                                     verify_apriori)
from stablepde.cli_runner import load_config, run
from stablepde.grid import Field, Grid, random_bandlimited, shift
from stablepde.kernel_model import eval_symbol, preset
from stablepde.martingale_mc import (MartingaleTest, MCConfig, bump, feynman_kac_check, martingale_residual,
                                     simulate)
from stablepde.singular_integral import (certify_Lp_bound, certify_sweep, kernel_multiplier, shift_kernel_l1,
                                         shift_reconstruct, narrowband_ensemble)
from stablepde.stable_heat_kernel import (build_kernel_table, contour_profile, convolve_G, convolve_G_table, eval_G,
                                          tail_integral)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def rel_change(values):
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(np.diff(values)) / np.abs(values[:-1])))


def quadrature_mass(table, t):
    """int G_t dx by adaptive quadrature in log-radius plus the analytic far tail."""
    d = table.d
    sph = 2.0 if d == 1 else 2 * np.pi
    unit = np.zeros(d)
    unit[0] = 1.0

    def f(s):
        r = np.exp(s)
        x = r if d == 1 else r * unit
        return float(eval_G(table, t, x)) * r ** d

    edges = np.linspace(-25.0, 40.0, 66)
    core = sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:]))
    far = tail_integral(table.alpha, d, np.exp(40.0) * (t * table.scale) ** (-1 / table.alpha))
    return sph * (core + far)


class TestCriterion1HeatKernel:
    def test_heat_kernel_identities(self, record_criterion):
        start = time.perf_counter()
        rng = np.random.default_rng(0)
        mass_err, scale_err, semi_err, real_space = 0.0, 0.0, 0.0, 0.0
        for alpha, d in ((0.5, 1), (1.0, 1), (1.5, 1), (1.5, 2)):
            table = build_kernel_table(alpha, d)
            for t in (0.1, 1.0, 10.0):
                mass_err = max(mass_err, abs(quadrature_mass(table, t) - 1))
                r = np.array([0.0137, 0.61, 3.3, 47.0]) * t ** (1 / alpha)
                x = r if d == 1 else np.stack([r, np.zeros_like(r)], axis=-1)
                direct = contour_profile(alpha, d, r, t=t)
                scale_err = max(scale_err, float(np.max(np.abs(eval_G(table, t, x) / direct - 1))))
            g = Grid(d, np.pi, 128 if d == 1 else 32)
            v = Field(g, random_bandlimited(g, rng, 1, 6)[0])
            two = convolve_G(table, 0.3, convolve_G(table, 0.7, v)).values
            one = convolve_G(table, 1.0, v).values
            semi_err = max(semi_err, float(np.max(np.abs(two - one)) / np.max(np.abs(one))))
            if d == 1 and alpha >= 1:
                a = convolve_G_table(table, 0.5, convolve_G_table(table, 0.5, v)).values
                b = convolve_G_table(table, 1.0, v).values
                real_space = max(real_space, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
        cauchy = build_kernel_table(1.0, 1)
        xs = np.linspace(-40, 40, 801) + 0.013
        cauchy_err = 0.0
        for t in (0.1, 1.0, 10.0):
            exact = t / (np.pi * (t * t + xs ** 2))
            cauchy_err = max(cauchy_err, float(np.max(np.abs(eval_G(cauchy, t, xs) / exact - 1))))
        elapsed = time.perf_counter() - start
        ok = mass_err <= 1e-6 and scale_err <= 1e-6 and semi_err <= 1e-10 and cauchy_err <= 1e-6 and elapsed <= 10
        record_criterion(1, ok, f"mass {mass_err:.1e} scaling {scale_err:.1e} semigroup {semi_err:.1e} "
                                f"(real-space {real_space:.1e}) cauchy {cauchy_err:.1e} time {elapsed:.1f}s")
        assert ok


class TestCriterion2Operator:
    def test_modes_match_symbol(self, record_criterion):
        start = time.perf_counter()
        worst, worst_all, orders = 0.0, 0.0, []
        for name, alpha in (("constant", 0.5), ("constant", 1.0), ("constant", 1.5), ("half-sphere", 0.7),
                            ("half-sphere", 1.5)):
            spec = preset(name, alpha, 1)
            errs = {}
            for n in (512, 1024):
                ks = np.arange(1, 512 // 16 + 1)
                mult = kernel_multiplier(spec, 0.0, Grid(1, np.pi, n))
                psi = np.array([eval_symbol(spec, 0.0, [0.0], [float(k)]) for k in ks])
                errs[n] = np.abs(mult[ks] - psi) / np.abs(psi)
                if n == 512:
                    all_k = np.arange(1, 256)
                    psi_all = np.array([eval_symbol(spec, 0.0, [0.0], [float(k)]) for k in all_k])
                    worst_all = max(worst_all, float(np.max(np.abs(mult[all_k] - psi_all) / np.abs(psi_all))))
            worst = max(worst, float(errs[512].max()))
            orders.append(float(np.log2(errs[512].max() / errs[1024].max())))
        elapsed = time.perf_counter() - start
        ok = worst <= 0.01 and min(orders) >= 1.0 and elapsed <= 30
        record_criterion(2, ok, f"max rel err {worst:.2e} on |k|<=n/16 (all modes {worst_all:.2f}) "
                                f"min order {min(orders):.2f} time {elapsed:.1f}s")
        assert ok


class TestCriterion3ShiftIdentity:
    def test_shift_identity_and_l1_scaling(self, record_criterion):
        g = Grid(1, 8.0, 512)
        v = Field(g, np.exp(-g.axis ** 2))
        rec = 0.0
        for delta in (0.3, 0.5, 0.8):
            for y in (0.3, 1.0, -2.0):
                got = shift_reconstruct(v, delta, [y]).values
                ref = shift(g, v.values, [y]) - v.values
                rec = max(rec, float(np.linalg.norm(got - ref) / np.linalg.norm(ref)))
        ys = np.geomspace(0.01, 1.0, 9)
        slope_err = 0.0
        for delta in (0.3, 0.5, 0.8):
            slope = np.polyfit(np.log(ys), np.log([shift_kernel_l1(y, delta) for y in ys]), 1)[0]
            slope_err = max(slope_err, abs(slope - delta))
        ok = rec <= 0.02 and slope_err <= 0.05
        record_criterion(3, ok, f"reconstruction rel L2 {rec:.2e} exponent deviation {slope_err:.1e}")
        assert ok


class TestCriterion4Certification:
    def test_sweep_variation(self, record_criterion):
        g = Grid(1, np.pi, 256)
        ens = narrowband_ensemble(g, np.random.default_rng(0), 20)
        variation, unit = 0.0, 0.0
        for alpha in (0.5, 1.0, 1.5):
            spec = preset("constant", alpha, 1)
            for p in (2, 4):
                c = [row["empirical_constant"] for row in certify_sweep(spec, alpha, [p], ens)]
                variation = max(variation, (max(c) - min(c)) / max(c))
                unit = max(unit, abs(certify_Lp_bound(spec, alpha, p, ens) - 1))
        ok = variation <= 0.20 and unit <= 1e-6
        record_criterion(4, ok, f"eps-sweep variation {variation:.3f} unit-kernel |ratio-1| {unit:.1e}")
        assert ok


class TestCriterion5Solver:
    def test_solver_correctness(self, record_criterion):
        g = Grid(1, np.pi, 128)
        spec = preset("constant", 1.5, 1)
        cfg = SolverConfig(lam=0.3, T=1.0, n_t=64)
        f = source_from_function(lambda t, x: np.cos(3 * x[..., 0]) + 0 * t, g, cfg)
        A = radial.frac_constant(1.5, 1) * 3 ** 1.5 + 0.3
        exact = ((1 - np.exp(-A * cfg.times)) / A)[:, None] * np.cos(3 * g.axis)[None]
        closed = float(np.max(np.abs(solve_constant(None, spec, f, cfg).values - exact)))

        mix = preset("hoelder-mix", 1.5, 1)
        g64 = Grid(1, np.pi, 64)
        res = []
        for n_t in (256, 512):
            c = SolverConfig(T=0.5, n_t=n_t, scheme="imex-frozen")
            fp = gaussian_pulse(g64, c)
            res.append(residual(mix, None, solve_variable(mix, None, fp, c), fp, c))
        order = float(np.log2(res[0] / res[1]))

        c = SolverConfig(lam=1.0, T=1.0, n_t=256)
        f1, f2 = random_sources(g, c, np.random.default_rng(2), size=2)
        half = preset("half-sphere", 1.5, 1)
        u1, u2 = solve_constant(None, half, f1, c), solve_constant(None, half, f2, c)
        u12 = solve_constant(None, half, f1.with_values(2 * f1.values - 3 * f2.values), c)
        lin = float(np.max(np.abs(u12.values - 2 * u1.values + 3 * u2.values)) / np.max(np.abs(u12.values)))
        tilted = solve_constant(None, half, tilt_source(f1, 0.7), SolverConfig(lam=0.3, T=1.0, n_t=256))
        tilt = float(np.max(np.abs(tilt_solution(u1, 0.7).values - tilted.values)) / np.max(np.abs(tilted.values)))
        ok = closed <= 1e-8 and res[-1] <= 1e-3 and order >= 1.0 and lin <= 1e-8 and tilt <= 1e-8
        record_criterion(5, ok, f"closed form {closed:.1e} residual {res[0]:.2e}->{res[1]:.2e} order {order:.2f} "
                                f"linearity {lin:.1e} tilt {tilt:.1e}")
        assert ok


@pytest.fixture(scope="module")
def estimate_reports():
    spec = preset("constant", 1.5, 1)
    reps = {}
    for n in (128, 256, 512):
        g = Grid(1, np.pi, n)
        cfg = SolverConfig(lam=1.0, T=1.0, n_t=128, p=2)
        ens = random_sources(g, cfg, np.random.default_rng(1), size=20)
        reps[n] = verify_apriori(spec, None, cfg, ens, sweep=(n == 128))
    return reps


class TestCriterion6Estimates:
    def test_plateau_bound_and_lem0(self, estimate_reports, record_criterion):
        R1 = [estimate_reports[n]["R1"] for n in (128, 256, 512)]
        lem0 = [estimate_reports[n]["lem0"] for n in (128, 256, 512)]
        sweep = estimate_reports[128]["lambda_sweep"]
        plateau = rel_change(R1)
        lem0_ok = all(np.isfinite(lem0)) and rel_change(lem0) <= 0.1
        ok = plateau <= 0.1 and sweep["bounded"] and lem0_ok
        values = [round(r, 4) for _, r in sweep["sweep"]]
        record_criterion(6, ok and sweep["nonincreasing"],
                         f"R1 change {plateau:.1e} bounded {sweep['bounded']} lem0 {max(lem0):.3f} "
                         f"lambda1 {sweep['lambda1']:g} sweep {values} nonincreasing {sweep['nonincreasing']}")
        assert ok

    @pytest.mark.xfail(strict=True, reason="lambda |u|_p / |f|_p increases toward 1 as lambda grows")
    def test_sweep_nonincreasing(self, estimate_reports):
        assert estimate_reports[128]["lambda_sweep"]["nonincreasing"]


class TestCriterion7Holder:
    def test_embedding_ratios_stable(self, record_criterion):
        spec = preset("constant", 1.5, 1)
        ratios, times = [], []
        for n in (128, 256, 512):
            g = Grid(1, np.pi, n)
            cfg = SolverConfig(T=1.0, n_t=128, p=8)
            f = gaussian_pulse(g, cfg)
            rep = holder_embedding_check(solve_constant(None, spec, f, cfg), cfg, 1.5, f)
            ratios.append(rep["ratio"])
            times.append(rep["time_ratio"])
        ok = all(np.isfinite(ratios + times)) and rel_change(ratios) <= 0.1 and rel_change(times) <= 0.1
        record_criterion(7, ok, f"space ratio {ratios[-1]:.4f} change {rel_change(ratios):.1e} "
                                f"time ratio {times[-1]:.4f} change {rel_change(times):.1e}")
        assert ok


class TestCriterion8MonteCarlo:
    def test_martingale_and_feynman_kac(self, record_criterion):
        start = time.perf_counter()
        alpha = 1.5
        spec = preset("constant", alpha, 1)
        g = Grid(1, np.pi, 256)
        test = MartingaleTest([bump(g, 0.0, 0.5), bump(g, 0.3, 0.4), bump(g, -0.3, 0.45)])
        ens = simulate(spec, None, alpha, 0.0, [0.0],
                       MCConfig(n_paths=10_000, seed=5, dt=1e-3, T=0.5, eps_cut=0.05, gaussian_correction=True))
        cover = martingale_residual(ens, test, spec, None, alpha)["all_cover"]
        control = all(martingale_residual(ens, test, spec, None, alpha + s)["any_reject"] for s in (0.2, -0.2))

        gs = Grid(1, np.pi, 128)
        sc = SolverConfig(T=0.5, n_t=64)
        f = gaussian_pulse(gs, sc)
        base = MCConfig(n_paths=100_000, seed=2, dt=2e-3, eps_cut=0.05, gaussian_correction=True)
        fk = feynman_kac_check(spec, None, alpha, f, 0.0, [0.3], base, sc)
        fine = feynman_kac_check(spec, None, alpha, f, 0.0, [0.3],
                                 MCConfig(n_paths=100_000, seed=3, dt=1e-3, eps_cut=0.025, gaussian_correction=True),
                                 sc, refine=False)
        shift_ = abs(fine["mc"] - fk["mc"])
        bars = 3 * np.hypot(fine["mc_se"], fk["mc_se"])
        elapsed = time.perf_counter() - start
        ok = cover and control and fk["agree"] and shift_ <= bars and elapsed <= 600
        record_criterion(8, ok, f"martingale cover {cover} control rejects {control} "
                                f"FK diff {fk['difference']:.1e} (3SE {3 * fk['combined_se']:.1e}) "
                                f"refinement shift {shift_:.1e} (bars {bars:.1e}) time {elapsed:.0f}s")
        assert ok


class TestCriterion9Determinism:
    def test_cli_reruns_byte_identical(self, tmp_path, record_criterion):
        configs = sorted(CONFIGS.glob("*.yaml"))
        bad = []
        for cfg in configs:
            dirs = [tmp_path / f"{cfg.stem}-{k}" for k in (1, 2)]
            codes = [run(cfg, (), d) for d in dirs]
            files = sorted(p.name for p in dirs[0].iterdir())
            same = sorted(p.name for p in dirs[1].iterdir()) == files and all(
                filecmp.cmp(dirs[0] / name, dirs[1] / name, shallow=False) for name in files)
            if codes != [0, 0] or not same:
                bad.append(cfg.stem)
        commands = {load_config(c).command for c in configs}
        ok = not bad and len(commands) == 7
        record_criterion(9, ok, f"{len(configs)} configs covering {len(commands)} commands, "
                                f"mismatches {bad or 'none'}")
        assert ok
