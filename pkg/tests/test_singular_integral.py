from dataclasses import replace

import numpy as np
import pytest

from stablepde.grid import Field, Grid, shift
from stablepde.kernel_model import AssumptionError, LowerOrderSpec, constant_symbol, eval_symbol, preset
from stablepde.singular_integral import (apply_A, apply_B, b_split, certify_Lp_bound, certify_sweep, frac_laplacian,
                                         grid_symbol, shift_kernel_l1, shift_reconstruct, narrowband_ensemble,
                                         smooth_window, tail_mass)


def mode_error(alpha, n, k=5):
    g = Grid(1, np.pi, n)
    u = Field(g, np.cos(k * g.axis))
    ref = constant_symbol(alpha, 1, k)
    out = apply_A(preset("constant", alpha, 1), 0.0, u).values
    return np.max(np.abs(out - ref * u.values)) / abs(ref)


class TestFractionalLaplacian:
    def test_single_mode(self):
        g = Grid(2, np.pi, 32)
        X = g.points
        v = Field(g, np.sin(3 * X[..., 0] + 4 * X[..., 1]))
        out = frac_laplacian(v, 0.8).values
        assert np.allclose(out, constant_symbol(0.8, 2, 5.0) * v.values, atol=1e-12)

    def test_kappa_range(self):
        g = Grid(1, 1.0, 8)
        with pytest.raises(ValueError):
            frac_laplacian(Field(g, np.zeros(8)), 2.0)


class TestApplyA:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5, 1.9])
    def test_constant_kernel_converges_to_symbol(self, alpha):
        e1, e2 = mode_error(alpha, 256), mode_error(alpha, 512)
        assert e2 < 1e-4
        assert np.log2(e1 / e2) > 1.0

    def test_x_dependent_kernel_matches_pointwise_symbol(self):
        g = Grid(1, np.pi, 64)
        spec = preset("hoelder-mix", 1.5, 1)
        u = Field(g, np.cos(3 * g.axis))
        out = apply_A(spec, 0.0, u).values
        psi = np.array([eval_symbol(spec, 0.0, [x], [3.0]) for x in g.axis])
        ref = np.real(psi * np.exp(3j * g.axis))
        assert np.max(np.abs(out - ref)) < 5e-3 * np.max(np.abs(ref))

    def test_separable_and_pointwise_paths_agree(self):
        g = Grid(1, np.pi, 32)
        spec = preset("hoelder-mix", 1.2, 1)
        u = Field(g, np.exp(np.sin(g.axis)))
        a = apply_A(spec, 0.0, u).values
        b = apply_A(replace(spec, terms=(), name="hoelder-mix-pointwise"), 0.0, u).values
        assert np.max(np.abs(a - b)) < 1e-12

    @pytest.mark.parametrize("name", ["constant", "half-sphere"])
    def test_two_dimensional_mode(self, name):
        g = Grid(2, np.pi, 64)
        X = g.points
        phase = 2 * X[..., 0] + X[..., 1]
        spec = preset(name, 1.5, 2)
        psi = eval_symbol(spec, 0.0, [0.0, 0.0], [2.0, 1.0])
        out = apply_A(spec, 0.0, Field(g, np.cos(phase))).values
        assert np.max(np.abs(out - np.real(psi * np.exp(1j * phase)))) < 3e-3 * abs(psi)

    def test_diagnostic_far_mass(self):
        g = Grid(1, np.pi, 64)
        res = apply_A(preset("constant", 0.5, 1), 0.0, Field(g, np.cos(g.axis)), diagnostics=True)
        assert res.far_mass > 0

    def test_constant_annihilated(self):
        g = Grid(1, np.pi, 64)
        out = apply_A(preset("half-sphere", 1.5, 1), 0.0, Field(g, np.full(64, 2.0))).values
        assert np.max(np.abs(out)) < 1e-12

    def test_alpha_one_asymmetric_rejected(self):
        g = Grid(1, np.pi, 32)
        with pytest.raises(AssumptionError):
            apply_A(preset("half-sphere", 1.0, 1), 0.0, Field(g, np.cos(g.axis)))

    def test_grid_symbol_exact_for_direction_kernels(self):
        g = Grid(1, np.pi, 32)
        sym = grid_symbol(preset("constant", 1.3, 1), 0.0, g)
        assert np.allclose(sym, constant_symbol(1.3, 1, g.freq_norm), rtol=1e-10, atol=1e-12)


class TestApplyB:
    def test_drift_and_atom(self):
        g = Grid(1, np.pi, 64)
        u = Field(g, np.sin(2 * g.axis))
        y0 = np.array([0.4])
        low = LowerOrderSpec(1, b=lambda t, x: 0.3 * np.ones_like(x), atoms=((y0, 0.5),))
        out = apply_B(low, 1.5, 0.0, u).values
        du = 2 * np.cos(2 * g.axis)
        ref = 0.3 * du + 0.5 * (np.sin(2 * (g.axis + 0.4)) - u.values - 0.4 * du)
        assert np.allclose(out, ref, atol=1e-12)

    def test_drift_ignored_below_order_one(self):
        g = Grid(1, np.pi, 16)
        low = LowerOrderSpec(1, b=lambda t, x: np.ones_like(x))
        assert np.allclose(apply_B(low, 0.7, 0.0, Field(g, np.sin(g.axis))).values, 0.0)

    def test_split_sums_to_whole(self):
        g = Grid(1, np.pi, 64)
        u = Field(g, np.cos(g.axis) + 0.3 * np.sin(3 * g.axis))
        low = LowerOrderSpec(1, h=lambda t, x, y: 0.2 * np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])),
                             atoms=((np.array([0.3]), 0.1), (np.array([-1.5]), 0.2)), eps0=0.5, h_upper=0.2)
        small, big = b_split(low, 0.7, 0.0, u)
        whole = apply_B(low, 0.7, 0.0, u)
        assert np.allclose(small.values + big.values, whole.values, atol=1e-10)
        assert np.max(np.abs(big.values)) > 1e-3


class TestShiftIdentity:
    def test_shift_reconstruction_of_bump(self):
        g = Grid(1, 8.0, 512)
        x = g.axis
        v = Field(g, np.exp(-x ** 2))
        for y in (0.3, 1.0):
            got = shift_reconstruct(v, 0.5, [y]).values
            ref = shift(g, v.values, [y]) - v.values
            assert np.linalg.norm(got - ref) < 0.02 * np.linalg.norm(ref)

    def test_delta_range(self):
        g = Grid(1, 1.0, 8)
        with pytest.raises(ValueError):
            shift_reconstruct(Field(g, np.zeros(8)), 1.0, [0.1])

    def test_l1_scales_like_power(self):
        ys = np.geomspace(0.01, 1.0, 9)
        vals = [shift_kernel_l1(y, 0.4) for y in ys]
        slope = np.polyfit(np.log(ys), np.log(vals), 1)[0]
        assert abs(slope - 0.4) < 0.01


class TestCertification:
    def test_unit_kernel_ratio_is_one(self, rng):
        g = Grid(1, np.pi, 128)
        ens = narrowband_ensemble(g, rng, 8)
        for alpha in (0.5, 1.0, 1.5):
            assert abs(certify_Lp_bound(preset("constant", alpha, 1), alpha, 3, ens) - 1) < 1e-6

    def test_truncation_sweep_bounded(self, rng):
        g = Grid(1, np.pi, 128)
        ens = narrowband_ensemble(g, rng, 8)
        rows = certify_sweep(preset("half-sphere", 1.5, 1), 1.5, [2], ens)
        c = [r["empirical_constant"] for r in rows]
        assert all(0 < v < 1 for v in c)
        assert rows[-1]["tail_mass"] == pytest.approx(tail_mass(preset("half-sphere", 1.5, 1), 1e-4))

    def test_ensemble_is_normalized(self, rng):
        g = Grid(2, np.pi, 32)
        for f in narrowband_ensemble(g, rng, 5):
            assert np.isclose(np.sqrt(np.mean(f.values ** 2)), 1.0)


class TestWindow:
    def test_limits_and_monotone(self):
        r = np.linspace(0, 3, 301)
        w = smooth_window(r, 1.0, 2.0)
        assert np.all(w[r <= 1.0] == 1.0) and np.all(w[r >= 2.0] == 0.0)
        assert np.all(np.diff(w) <= 0)
