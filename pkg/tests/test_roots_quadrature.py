from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodalcx.quadrature import adaptive_simpson
from nodalcx.roots import BracketError, bisect_vec, rtsafe, rtsafe_vec


class TestRtsafe:
    def test_cos(self):
        r = rtsafe(lambda x: (math.cos(x), -math.sin(x)), 1.0, 2.0)
        assert r == pytest.approx(math.pi / 2, rel=1e-15)

    def test_flat_derivative_falls_back_to_bisection(self):
        # f'(0) = 0 at the initial guess
        r = rtsafe(lambda x: (x**3 - 0.001, 3 * x * x), -1.0, 1.0, x0=0.0)
        assert r == pytest.approx(0.1, rel=1e-14)

    def test_no_bracket(self):
        with pytest.raises(BracketError):
            rtsafe(lambda x: (x * x + 1, 2 * x), -1.0, 1.0)

    def test_endpoint_root(self):
        assert rtsafe(lambda x: (x, 1.0), 0.0, 1.0) == 0.0

    @settings(max_examples=50, deadline=None)
    @given(c=st.floats(0.01, 100.0))
    def test_sqrt(self, c):
        r = rtsafe(lambda x: (x * x - c, 2 * x), 0.0, max(1.0, c))
        assert r == pytest.approx(math.sqrt(c), rel=1e-14)


class TestVectorized:
    def test_many_roots(self):
        c = np.linspace(0.1, 10.0, 200)
        r = rtsafe_vec(lambda x: (x * x - c, 2 * x), np.zeros_like(c), np.full_like(c, 10.0))
        assert np.allclose(r, np.sqrt(c), rtol=1e-14)

    def test_bracket_error(self):
        with pytest.raises(BracketError):
            rtsafe_vec(lambda x: (x * x + 1, 2 * x), np.array([-1.0, 0.0]), np.array([1.0, 1.0]))

    def test_bisect(self):
        c = np.array([0.5, 1.5, 2.5])
        r = bisect_vec(lambda x: np.cos(x) - np.cos(c), np.zeros(3), np.full(3, math.pi))
        assert np.allclose(r, c, atol=1e-14)


class TestSimpson:
    @pytest.mark.parametrize(
        "f, a, b, exact",
        [
            (math.sin, 0.0, math.pi, 2.0),
            (math.exp, -1.0, 2.0, math.exp(2) - math.exp(-1)),
            (lambda t: 1 / (1 + t * t), 0.0, 1.0, math.pi / 4),
            (lambda t: t**3, 2.0, -1.0, (1 - 16) / 4),
        ],
    )
    def test_known(self, f, a, b, exact):
        assert adaptive_simpson(f, a, b, 1e-12) == pytest.approx(exact, abs=1e-11)

    def test_empty(self):
        assert adaptive_simpson(math.sin, 1.0, 1.0) == 0.0

    def test_cubic_exact_in_one_panel(self):
        calls = []

        def f(t):
            calls.append(t)
            return t**3 - t

        assert adaptive_simpson(f, 0.0, 2.0) == pytest.approx(2.0, abs=1e-14)
        assert len(calls) == 5
