import numpy as np
import pytest
from scipy import stats

from stablepde.cauchy_solver import SolverConfig, gaussian_pulse
from stablepde.grid import Grid
from stablepde.kernel_model import KernelSpec, LowerOrderSpec, preset
from stablepde.martingale_mc import (DominationError, MartingaleTest, MCConfig, block_rng, bump, dyadic_pairs,
                                     feynman_kac_check, ks_stable, ks_stable_radial, martingale_residual, mean_se,
                                     ring_counts, sample_symmetric_stable, simulate)
from stablepde.stable_heat_kernel import build_kernel_table


class TestSampler:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_one_dimensional_law(self, alpha):
        tb = build_kernel_table(alpha, 1)
        x = sample_symmetric_stable(alpha, 0.01, np.random.default_rng(3), 1, 20000)
        assert x.shape == (20000, 1)
        assert ks_stable(x, alpha, tb, 0.01) > 1e-3

    def test_cauchy_against_scipy(self):
        x = sample_symmetric_stable(1.0, 1.0, np.random.default_rng(8), 1, 20000)[:, 0]
        assert stats.kstest(x, stats.cauchy.cdf).pvalue > 1e-3

    @pytest.mark.parametrize("alpha", [0.7, 1.6])
    def test_two_dimensional_radial_law(self, alpha):
        tb = build_kernel_table(alpha, 2)
        x = sample_symmetric_stable(alpha, 1.0, np.random.default_rng(4), 2, 20000)
        assert ks_stable_radial(x, tb) > 1e-3
        ang = np.arctan2(x[:, 1], x[:, 0])
        assert stats.kstest(ang, stats.uniform(-np.pi, 2 * np.pi).cdf).pvalue > 1e-3


class TestConfigAndStreams:
    def test_validation(self):
        with pytest.raises(ValueError):
            MCConfig(n_paths=0)
        with pytest.raises(ValueError):
            MCConfig(eps_cut=0)

    def test_block_streams_independent_of_block_size_choice(self):
        a = block_rng(7, 3).standard_normal(4)
        b = block_rng(7, 3).standard_normal(4)
        c = block_rng(7, 4).standard_normal(4)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_mean_se(self):
        m, se = mean_se([1.0, 2.0, 3.0, 4.0])
        assert m == 2.5 and np.isclose(se, np.std([1, 2, 3, 4], ddof=1) / 2)


class TestSimulate:
    def test_null_generator_keeps_start(self):
        ens = simulate(None, None, 0.5, 0.0, [0.3], MCConfig(n_paths=50, dt=0.1, T=1.0))
        assert np.all(ens.X == 0.3)

    def test_pure_drift(self):
        low = LowerOrderSpec(1, b=lambda t, x: 0.5 * np.ones_like(x))
        ens = simulate(None, low, 1.5, 0.0, [0.0], MCConfig(n_paths=10, dt=0.1, T=1.0))
        assert np.allclose(ens.final, 0.5)

    def test_atom_counts_are_poisson(self):
        low = LowerOrderSpec(1, atoms=((np.array([2.0]), 3.0),))
        ens = simulate(None, low, 0.7, 0.0, [0.0], MCConfig(n_paths=4000, dt=0.05, T=1.0, seed=2))
        counts = ens.final[:, 0] / 2.0
        assert abs(counts.mean() - 3.0) < 4 * np.sqrt(3.0 / 4000)

    def test_deterministic_given_seed(self):
        spec = preset("hoelder-mix", 1.5, 1)
        cfg = MCConfig(n_paths=300, dt=0.01, T=0.2, seed=11, block_size=128, gaussian_correction=True)
        a = simulate(spec, None, 1.5, 0.0, [0.1], cfg)
        b = simulate(spec, None, 1.5, 0.0, [0.1], cfg)
        assert a.digest() == b.digest()
        c = simulate(spec, None, 1.5, 0.0, [0.1], MCConfig(n_paths=300, dt=0.01, T=0.2, seed=12, block_size=128))
        assert a.digest() != c.digest()

    def test_domination_violation(self):
        spec = KernelSpec(lambda t, x, y: 2.0 * np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])),
                          1.5, 1, K_upper=1.0)
        with pytest.raises(DominationError):
            simulate(spec, None, 1.5, 0.0, [0.0], MCConfig(n_paths=200, dt=0.05, T=1.0))

    def test_thinned_ring_counts(self):
        spec = preset("half-sphere", 1.5, 1)
        ens = simulate(spec, None, 1.5, 0.0, [0.0],
                       MCConfig(n_paths=2000, seed=1, dt=1e-2, T=1.0, eps_cut=0.05, max_log=10 ** 8))
        assert np.all(ens.jump_size > 0)
        for row in ring_counts(ens, spec, [(0.1, 0.2), (0.5, 1.0), (2.0, 10.0)]):
            assert abs(row["z"]) < 4

    def test_marginal_of_unit_kernel(self):
        spec = preset("constant", 1.5, 1)
        tb = build_kernel_table(1.5, 1, convention="generator")
        cfg = MCConfig(n_paths=20000, seed=1, dt=1e-2, T=1.0, eps_cut=0.05, gaussian_correction=True,
                       store_paths=False)
        ens = simulate(spec, None, 1.5, 0.0, [0.0], cfg)
        assert ens.X is None
        assert ks_stable(ens.final, 1.5, tb, 1.0) > 1e-3

    def test_two_dimensional_paths(self):
        spec = preset("constant", 1.2, 2)
        ens = simulate(spec, None, 1.2, 0.0, [0.0, 0.0], MCConfig(n_paths=100, dt=0.05, T=0.5))
        assert ens.X.shape == (100, 11, 2) and np.all(np.isfinite(ens.X))


class TestMartingale:
    def test_dyadic_pairs(self):
        assert dyadic_pairs(np.linspace(0, 1, 5), 1) == [(0, 4), (0, 2), (2, 4)]

    def test_test_functions_must_vanish_at_edge(self):
        g = Grid(1, np.pi, 64)
        with pytest.raises(ValueError):
            MartingaleTest([bump(g, 0.0, 2.0)])

    def test_residual_covers_and_control_rejects(self):
        g = Grid(1, np.pi, 256)
        spec = preset("constant", 1.5, 1)
        test = MartingaleTest([bump(g, 0.0, 0.5), bump(g, 0.3, 0.4)])
        ens = simulate(spec, None, 1.5, 0.0, [0.0],
                       MCConfig(n_paths=4000, seed=5, dt=2e-3, T=0.5, eps_cut=0.05, gaussian_correction=True))
        assert martingale_residual(ens, test, spec, None, 1.5)["all_cover"]
        assert martingale_residual(ens, test, spec, None, 1.1)["any_reject"]


class TestFeynmanKac:
    def test_small_ensemble_agrees(self):
        g = Grid(1, np.pi, 64)
        sc = SolverConfig(T=0.5, n_t=32)
        f = gaussian_pulse(g, sc)
        r = feynman_kac_check(preset("constant", 1.5, 1), None, 1.5, f, 0.0, [0.3],
                              MCConfig(n_paths=5000, seed=2, dt=5e-3, eps_cut=0.05, gaussian_correction=True), sc)
        assert r["agree"] and r["mc_se"] < 2e-3

    def test_lambda_must_vanish(self):
        g = Grid(1, np.pi, 16)
        sc = SolverConfig(lam=1.0, T=0.5, n_t=8)
        with pytest.raises(ValueError):
            feynman_kac_check(preset("constant", 1.5, 1), None, 1.5, gaussian_pulse(g, sc), 0.0, [0.0],
                              MCConfig(n_paths=10), sc)
