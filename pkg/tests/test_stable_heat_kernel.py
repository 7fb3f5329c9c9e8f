import numpy as np
import pytest
from scipy import integrate
from scipy.stats import levy_stable

from stablepde import radial
from stablepde.grid import Field, Grid, random_bandlimited
from stablepde.stable_heat_kernel import (HeatKernelTable, build_kernel_table, cdf_1d, certify_smoothing,
                                          contour_profile, convolve_G, convolve_G_table, eval_G, k_at_zero,
                                          l1_derivative_sum, large_r_series, radial_cdf, read_table,
                                          small_r_series, tail_integral, write_table)


@pytest.fixture(scope="module")
def table15():
    return build_kernel_table(1.5, 1)


@pytest.fixture(scope="module")
def cauchy2():
    return build_kernel_table(1.0, 2)


class TestProfile:
    @pytest.mark.parametrize("alpha", [0.6, 1.2, 1.8])
    def test_one_dimensional_density_matches_scipy(self, alpha):
        x = np.array([0.05, 0.4, 1.7, 6.0, 40.0])
        ref = levy_stable.pdf(x, alpha, 0.0)
        assert np.max(np.abs(contour_profile(alpha, 1, x) / ref - 1)) < 1e-8

    def test_cauchy_closed_forms(self):
        r = np.array([1e-3, 0.5, 3.0, 80.0])
        assert np.allclose(contour_profile(1.0, 1, r), 1 / (np.pi * (1 + r ** 2)), rtol=1e-11)
        assert np.allclose(contour_profile(1.0, 2, r), 1 / (2 * np.pi * (1 + r ** 2) ** 1.5), rtol=1e-11)

    def test_value_at_origin(self):
        for alpha, d in ((0.8, 1), (1.5, 2)):
            assert np.isclose(contour_profile(alpha, d, [1e-9])[0], k_at_zero(alpha, d), rtol=1e-9)

    def test_value_at_origin_by_quadrature(self):
        ref = integrate.quad(lambda s: np.exp(-np.sqrt(s)), 0, np.inf)[0] / np.pi
        assert abs(build_kernel_table(0.5, 1).K(np.array([0.0]))[0] - ref) < 1e-4 * ref

    def test_series_agree_in_their_ranges(self):
        assert np.allclose(small_r_series(1.5, 1, np.array([0.05, 0.2])), contour_profile(1.5, 1, [0.05, 0.2]),
                           rtol=1e-10)
        assert np.allclose(large_r_series(0.7, 2, np.array([5e3, 2e4])), contour_profile(0.7, 2, [5e3, 2e4]),
                           rtol=1e-8)

    def test_time_argument_is_rescaling(self):
        r, t = np.array([0.3, 2.0]), 0.37
        direct = contour_profile(1.3, 2, r, t=t)
        scaled = t ** (-2 / 1.3) * contour_profile(1.3, 2, r * t ** (-1 / 1.3))
        assert np.allclose(direct, scaled, rtol=1e-10)

    def test_tail_integral_against_quadrature(self):
        R = 50.0
        ref = integrate.quad(lambda r: levy_stable.pdf(r, 1.5, 0.0), R, np.inf)[0]
        assert np.isclose(tail_integral(1.5, 1, R), ref, rtol=1e-6)


class TestTable:
    def test_mass_and_nodes(self, table15, cauchy2):
        assert abs(table15.mass() - 1) < 1e-9
        assert abs(cauchy2.mass() - 1) < 1e-9
        assert table15.meta["n_freq"] == 4096 and cauchy2.meta["n_freq"] == 1024

    def test_resolution_floor(self):
        with pytest.raises(ValueError):
            build_kernel_table(1.5, 1, n_freq=1024)
        with pytest.raises(ValueError):
            build_kernel_table(2.0, 1)

    def test_interpolation_off_nodes(self, table15):
        r = np.array([3e-7, 0.0123, 0.77, 31.4, 3e4])
        assert np.allclose(table15.K(r), contour_profile(1.5, 1, r), rtol=1e-9)

    def test_mass_by_independent_quadrature(self, table15):
        m = 2 * integrate.quad(lambda x: float(eval_G(table15, 0.4, x)), 0, np.inf, limit=400)[0]
        assert abs(m - 1) < 1e-6

    def test_self_similarity(self, table15):
        x, t, c = np.array([0.2, 1.3, 9.0]), 0.6, 1.7
        assert np.allclose(eval_G(table15, c ** 1.5 * t, c * x), c ** -1 * eval_G(table15, t, x), rtol=1e-9)
        assert np.isclose(eval_G(build_kernel_table(1.0, 1), 2.0, 0.0), 1 / (2 * np.pi), rtol=1e-10)

    def test_convention_scale(self, table15):
        gen = table15.with_convention("generator")
        assert gen.scale == radial.frac_constant(1.5, 1)
        assert np.isclose(eval_G(gen, 1.0, 0.5), eval_G(table15, gen.scale, 0.5))
        with pytest.raises(ValueError):
            table15.with_convention("other")

    def test_roundtrip(self, table15, tmp_path):
        write_table(tmp_path / "hk", table15)
        back = read_table(tmp_path / "hk")
        assert isinstance(back, HeatKernelTable)
        assert np.array_equal(back.values, table15.values) and back.alpha == 1.5

    def test_two_dimensional_argument(self, cauchy2):
        x = np.array([[0.3, 0.4], [3.0, 4.0]])
        t = 2.0
        ref = t / (2 * np.pi * (t ** 2 + 25 * np.array([0.01, 1.0])) ** 1.5)
        assert np.allclose(eval_G(cauchy2, t, x), ref, rtol=1e-9)


class TestConvolution:
    def test_spectral_semigroup(self, table15, rng):
        g = Grid(1, np.pi, 128)
        v = Field(g, random_bandlimited(g, rng, 1, 8)[0])
        two = convolve_G(table15, 0.2, convolve_G(table15, 0.3, v))
        one = convolve_G(table15, 0.5, v)
        assert np.max(np.abs(two.values - one.values)) < 1e-13

    @pytest.mark.parametrize("t", [0.5, 1.0])
    def test_real_space_convolution_matches_spectral(self, table15, rng, t):
        g = Grid(1, np.pi, 256)
        v = Field(g, random_bandlimited(g, rng, 1, 6)[0])
        a = convolve_G_table(table15, t, v).values
        b = convolve_G(table15, t, v).values
        assert np.linalg.norm(a - b) < 1e-8 * np.linalg.norm(b)

    def test_real_space_convolution_2d(self, cauchy2, rng):
        g = Grid(2, np.pi, 64)
        v = Field(g, random_bandlimited(g, rng, 1, 4)[0])
        a = convolve_G_table(cauchy2, 0.5, v).values
        b = convolve_G(cauchy2, 0.5, v).values
        assert np.linalg.norm(a - b) < 1e-6 * np.linalg.norm(b)

    def test_constants_are_preserved(self, table15):
        g = Grid(1, np.pi, 64)
        one = Field(g, np.ones(64))
        assert np.allclose(convolve_G(table15, 0.8, one).values, 1.0, atol=1e-14)
        assert np.allclose(convolve_G_table(table15, 0.8, one).values, 1.0, atol=1e-9)

    def test_positive_time_required(self, table15):
        g = Grid(1, np.pi, 8)
        with pytest.raises(ValueError):
            convolve_G(table15, 0.0, Field(g, np.zeros(8)))


class TestSmoothing:
    def test_single_mode_closed_form(self):
        tb = build_kernel_table(1.0, 1, convention="generator")
        g = Grid(1, np.pi, 128)
        v = Field(g, np.cos(3 * g.axis))
        c = tb.scale
        got = certify_smoothing(tb, (), 1.0, [0.1, 1.0], [v])
        want = [t * c * 3 * np.exp(-t * c * 3) for t in (0.1, 1.0)]
        assert np.allclose(got, want, rtol=1e-10)

    def test_l1_sum_stable_under_refinement(self):
        a = l1_derivative_sum(1.2, 1, (1,), 0.0, 16, 4096)
        b = l1_derivative_sum(1.2, 1, (1,), 0.0, 32, 8192)
        assert abs(a - b) < 0.01 * b


class TestCDF:
    def test_cdf_matches_scipy(self, table15):
        x = np.array([-8.0, -0.4, 0.0, 1.1, 30.0])
        assert np.allclose(cdf_1d(table15, x), levy_stable.cdf(x, 1.5, 0.0), atol=1e-8)

    def test_radial_cdf_far_tail(self, cauchy2):
        r = np.array([1e5])
        assert np.isclose(radial_cdf(cauchy2, r)[0], 1 - 1 / np.sqrt(1 + 1e10), rtol=0, atol=1e-12)
