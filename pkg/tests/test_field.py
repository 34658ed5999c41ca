from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodalcx.errors import FieldOverflowError
from nodalcx.field import (
    SQRT3,
    Y0,
    Y2,
    FieldHandle,
    chebyshev_u,
    eval_g,
    eval_g_gc,
    eval_psi,
    eval_psi_mp,
    eval_psi_tilde,
    eval_U,
    eval_U_grid,
    eval_v,
    eval_w,
    eval_w_tilde,
    mp_points,
    w_tilde,
)

xs = st.floats(-2 * math.pi, 2 * math.pi)
ys = st.floats(-Y2, Y2)


def fd_jet(fn, x, y, h=1e-4):
    """First derivatives of the value and second derivatives of the first
    derivatives, by fourth-order central differences."""

    def d(shift, comp):
        f = [getattr(fn(*shift(k * h)), comp) for k in (-2, -1, 1, 2)]
        return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)

    along_x = lambda t: (x + t, y)
    along_y = lambda t: (x, y + t)
    return {
        "dx": d(along_x, "value"),
        "dy": d(along_y, "value"),
        "dxx": d(along_x, "dx"),
        "dxy": d(along_y, "dx"),
        "dyy": d(along_y, "dy"),
    }, fn(x, y)


@pytest.fixture(scope="module")
def pts():
    rng = np.random.default_rng(1)
    return rng.uniform(-2 * math.pi, 2 * math.pi, 200), rng.uniform(-2.5, 2.5, 200)


class TestJetsAgainstFiniteDifferences:
    @pytest.mark.parametrize("kind", ["W", "PSI", "V", "G", "U"])
    def test_all_partials(self, kind, pert, eps, pts):
        x, y = pts
        handle = FieldHandle(kind, 0.0 if kind == "W" else 1e-3, pert)
        fd, j = fd_jet(handle, x, y)
        scale = 1.0 + np.abs(j.value) + np.abs(j.dxx) + np.abs(j.dyy)
        for name, ref in fd.items():
            err = np.abs(getattr(j, name) - ref) / scale
            assert err.max() < 1e-7, (kind, name, err.max())

    def test_g_c_is_minus_gx_over_sin(self, pert, pts):
        x, y = pts
        jg, gc = eval_g_gc(x, y, 1e-3, pert)
        sel = np.abs(np.sin(x)) > 0.1
        assert np.allclose(gc[sel], -jg.dx[sel] / np.sin(x[sel]), rtol=1e-10, atol=1e-12)


class TestIdentities:
    def test_helmholtz(self, pert, eps):
        rng = np.random.default_rng(2)
        x = rng.uniform(-2 * math.pi, 2 * math.pi, 20000)
        y = rng.uniform(-Y2, Y2, 20000)
        for fn in (lambda a, b: eval_w(a, b), lambda a, b: eval_psi(a, b, pert), lambda a, b: eval_v(a, b, eps, pert)):
            j = fn(x, y)
            assert np.max(np.abs(j.helmholtz_defect()) / (1 + np.abs(j.value))) < 1e-11

    def test_U_is_antiderivative_and_solves_inhomogeneous(self, pert):
        rng = np.random.default_rng(3)
        x = rng.uniform(-2 * math.pi, 2 * math.pi, 500)
        y = rng.uniform(-2.5, 2.5, 500)
        ju = eval_U(x, y, 1e-3, pert)
        jv = eval_v(x, y, 1e-3, pert)
        assert np.array_equal(ju.dx, jv.value)
        # ΔU + 4U = -1
        assert np.max(np.abs(ju.dxx + ju.dyy + 4 * ju.value + 1)) < 1e-9

    def test_g_times_sin_is_v(self, pert, eps):
        rng = np.random.default_rng(4)
        x = rng.uniform(-2 * math.pi, 2 * math.pi, 2000)
        y = rng.uniform(-Y2, Y2, 2000)
        g = eval_g(x, y, 1e-6, pert).value
        v = eval_v(x, y, 1e-6, pert).value
        assert np.max(np.abs(g * np.sin(x) - v) / (1 + np.abs(v))) < 1e-9

    def test_w_tilde_product_form(self):
        x = np.linspace(-6, 6, 101)
        y = np.linspace(-3, 3, 101)
        assert np.allclose(w_tilde(x, y), np.cos(SQRT3 * y) - np.cos(x), atol=1e-14)
        # exactly zero on the line x = √3 y in the product form
        assert w_tilde(SQRT3 * 0.7, 0.7) == pytest.approx(0.0, abs=1e-16)

    def test_grid_matches_pointwise(self, pert, eps):
        gx = np.linspace(-6, 6, 31)
        gy = np.linspace(-3.6, 3.6, 17)
        X, Y = np.meshgrid(gx, gy)
        assert np.allclose(eval_U_grid(gx, gy, eps, pert), eval_U(X, Y, eps, pert).value, atol=1e-13)


class TestChebyshev:
    @pytest.mark.parametrize("m", [0, 1, 2, 5, 13])
    def test_sine_ratio(self, m):
        x = np.linspace(0.1, 3.0, 50)
        assert np.allclose(chebyshev_u(m, np.cos(x)), np.sin((m + 1) * x) / np.sin(x), atol=1e-12)

    def test_limits_at_multiples_of_pi(self):
        # U_m(1) = m + 1, U_m(-1) = (-1)^m (m + 1)
        assert chebyshev_u(7, np.array(1.0)) == pytest.approx(8)
        assert chebyshev_u(7, np.array(-1.0)) == pytest.approx(-8)

    def test_psi_tilde_smooth_across_zero(self, pert):
        j0 = eval_psi_tilde(0.0, 1.0, pert)
        jp = eval_psi_tilde(1e-6, 1.0, pert)
        ratio = eval_psi(1e-6, 1.0, pert).value / math.sin(1e-6)
        assert float(jp.value) == pytest.approx(ratio, rel=1e-8)
        assert float(j0.value) == pytest.approx(float(jp.value), rel=1e-8)


class TestExtendedPrecision:
    def test_float_path_matches_mpmath(self, pert):
        for x, y in [(0.3, 0.4), (2.0, 1.5), (-1.0, 3.0)]:
            jm = eval_psi_mp(x, y, pert)
            jf = eval_psi(x, y, pert)
            for a, b in zip(jf, jm):
                assert float(a) == pytest.approx(float(b), rel=1e-9, abs=1e-9)

    def test_special_points(self):
        p = mp_points()
        with mpmath.workdps(60):
            assert abs(p["z0"][1] * mpmath.sqrt(3) - mpmath.pi) < mpmath.mpf(10) ** -55


class TestSymmetry:
    @settings(max_examples=60, deadline=None)
    @given(x=xs, y=ys)
    def test_v_odd_in_x_even_in_y(self, pert, x, y):
        e = 1e-6
        v = float(eval_v(x, y, e, pert).value)
        assert float(eval_v(-x, y, e, pert).value) == pytest.approx(-v, abs=1e-9)
        assert float(eval_v(x, -y, e, pert).value) == pytest.approx(v, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(t=st.floats(0.0, math.pi), y=ys)
    def test_g_even_about_pi(self, pert, t, y):
        a = float(eval_g(math.pi + t, y, 1e-6, pert).value)
        b = float(eval_g(math.pi - t, y, 1e-6, pert).value)
        assert a == pytest.approx(b, abs=1e-9)


class TestHandleAndErrors:
    def test_kinds(self, pert):
        with pytest.raises(ValueError):
            FieldHandle("Q")
        with pytest.raises(ValueError):
            FieldHandle("PSI")
        with pytest.raises(ValueError):
            FieldHandle("V", 1e-3, None)
        with pytest.raises(ValueError):
            FieldHandle("V", -1.0, pert)
        assert float(FieldHandle("W")(math.pi / 2, 0.0).value) == pytest.approx(1.0)

    def test_overflow_cap(self, pert):
        with pytest.raises(FieldOverflowError):
            eval_psi(0.0, 60.0, pert)

    def test_w_zero_lines(self):
        y = np.linspace(-Y2, Y2, 11)
        for x in (np.zeros_like(y), np.full_like(y, math.pi), SQRT3 * y, 2 * math.pi - SQRT3 * np.abs(y)):
            assert np.max(np.abs(eval_w(x, y).value)) < 1e-14
        assert float(eval_w_tilde(math.pi, Y0).value) == pytest.approx(0.0, abs=1e-15)
