import numpy as np
import pytest

from stablepde.fieldio import read_array, read_field, roundtrip_identical, write_array, write_field
from stablepde.grid import (Field, Grid, SpectralInterpolator, gradient, hessian, lp_norm, random_bandlimited, shift,
                            spacetime_lp, time_weights)


class TestGrid:
    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            Grid(1, np.pi, 100)
        with pytest.raises(ValueError):
            Grid(3, np.pi, 64)

    def test_points_and_wavenumbers(self):
        g = Grid(2, 2.0, 8)
        assert g.points.shape == (8, 8, 2)
        assert g.dx == 0.5
        assert np.isclose(g.wavenumbers[1, 0, 0], np.pi / 2)

    def test_spectral_derivatives_of_a_mode(self):
        g = Grid(1, np.pi, 64)
        x = g.axis
        u = np.sin(3 * x)
        assert np.allclose(gradient(g, u)[:, 0], 3 * np.cos(3 * x), atol=1e-12)
        assert np.allclose(hessian(g, u)[:, 0, 0], -9 * u, atol=1e-11)

    def test_shift_matches_exact_translation(self):
        g = Grid(1, np.pi, 64)
        u = np.cos(2 * g.axis) + np.sin(5 * g.axis)
        y = 0.3141
        assert np.allclose(shift(g, u, [y]), np.cos(2 * (g.axis + y)) + np.sin(5 * (g.axis + y)), atol=1e-12)

    def test_lp_norm_of_constant(self):
        g = Grid(1, 1.0, 16)
        assert np.isclose(lp_norm(g, np.ones(16), 2), np.sqrt(2.0))
        assert lp_norm(g, -3 * np.ones(16), np.inf) == 3

    def test_spacetime_norm_uses_trapezoid_weights(self):
        g = Grid(1, 1.0, 16)
        t = np.array([0.0, 0.5, 1.5])
        assert np.allclose(time_weights(t), [0.25, 0.75, 0.5])
        v = np.ones((3, 16))
        assert np.isclose(spacetime_lp(g, v, t, 2), np.sqrt(2.0 * 1.5))

    def test_interpolator_reproduces_smooth_field(self):
        g = Grid(2, np.pi, 32)
        f = np.cos(g.points[..., 0]) * np.sin(2 * g.points[..., 1])
        pts = np.array([[0.123, -1.1], [2.9, 0.7]])
        interp = SpectralInterpolator(g, f)
        assert np.allclose(interp(pts), np.cos(pts[:, 0]) * np.sin(2 * pts[:, 1]), atol=1e-4)

    def test_bandlimited_support(self, rng):
        g = Grid(1, np.pi, 64)
        v = random_bandlimited(g, rng, 2, 4, 1)[0]
        c = np.abs(np.fft.fft(v))
        k = np.abs(np.fft.fftfreq(64, 1 / 64))
        assert c[(k < 2) | (k > 4)].max() < 1e-10


class TestField:
    def test_shape_and_finiteness(self):
        g = Grid(1, 1.0, 8)
        with pytest.raises(ValueError):
            Field(g, np.zeros(7))
        with pytest.raises(ValueError):
            Field(g, np.full(8, np.nan))
        f = Field(g, np.zeros((3, 8)), np.arange(3.0))
        assert f.time_indexed


class TestFieldIO:
    def test_array_roundtrip_is_byte_identical(self, tmp_path):
        arr = np.arange(12.0).reshape(3, 4) / 7
        write_array(tmp_path / "a", arr, {"kind": "test", "x": 0.1})
        back, header = read_array(tmp_path / "a")
        assert np.array_equal(back, arr)
        assert header["shape"] == [3, 4] and header["dtype"] == "<f8"
        assert roundtrip_identical(tmp_path / "a")

    def test_field_roundtrip(self, tmp_path):
        g = Grid(1, np.pi, 16)
        f = Field(g, np.random.default_rng(0).standard_normal((2, 16)), np.array([0.0, 0.5]))
        write_field(tmp_path / "f", f)
        back, _ = read_field(tmp_path / "f")
        assert back.grid == g and np.array_equal(back.values, f.values)
        assert roundtrip_identical(tmp_path / "f.json")
