"""Adaptive Simpson quadrature with Richardson-corrected panels."""
from __future__ import annotations

import math


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12, max_depth: int = 50) -> float:
    """Integrate a scalar function on [a, b] to absolute tolerance ``tol``.

    Each panel is accepted when ``|S_left + S_right - S_whole| <= 15 tol``;
    the accepted value includes the ``(S2 - S1) / 15`` correction.
    """
    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _recurse(f, a, b, fa, fm, fb, whole, tol, max_depth)


def _recurse(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm = 0.5 * (a + m)
    rm = 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol or not math.isfinite(delta):
        return left + right + delta / 15.0
    return _recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + _recurse(
        f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1
    )
