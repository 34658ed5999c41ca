"""Bracketed scalar root finding: safeguarded Newton with bisection fallback.

``f`` returns ``(value, derivative)``.  The bracket is maintained on every
iteration, so convergence never depends on the Newton step behaving.
"""
from __future__ import annotations

import math

import numpy as np


class BracketError(ValueError):
    pass


def rtsafe(
    f, a: float, b: float, x0: float | None = None, xtol: float = 1e-15, maxiter: int = 200, atol: float = 1e-300
) -> float:
    fa, _ = f(a)
    fb, _ = f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if math.copysign(1.0, fa) == math.copysign(1.0, fb):
        raise BracketError(f"no sign change on [{a!r}, {b!r}]: f = {fa:.3g}, {fb:.3g}")
    # orient so that f(lo) < 0 < f(hi)
    lo, hi = (a, b) if fa < 0 else (b, a)
    x = 0.5 * (a + b) if x0 is None or not min(a, b) <= x0 <= max(a, b) else x0
    dx_old = abs(b - a)
    dx = dx_old
    fx, dfx = f(x)
    for _ in range(maxiter):
        if fx == 0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        newton_ok = dfx != 0 and ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) < 0
        if newton_ok and abs(fx / dfx) <= xtol * max(atol, abs(x)):
            return x - fx / dfx
        if not newton_ok or abs(2.0 * fx) > abs(dx_old * dfx):
            dx_old = dx
            dx = 0.5 * (hi - lo)
            x = lo + dx
        else:
            dx_old = dx
            dx = fx / dfx
            x = x - dx
        tol = xtol * max(atol, abs(x))
        if abs(dx) <= tol or abs(hi - lo) <= tol:
            return x
        fx, dfx = f(x)
    return x


def rtsafe_vec(
    f, a, b, x0=None, xtol: float = 1e-15, maxiter: int = 200, atol: float = 1e-300, ftol: float = 0.0
):
    """Vectorized :func:`rtsafe`; ``f`` maps an array to ``(values, derivatives)``.

    A row also counts as converged when a small Newton step (below
    ``1e-8`` relative) fails to halve the previous one: at that point the
    iteration is walking on rounding noise, and bisecting a one-sided
    bracket would only throw the iterate away.
    Raises :class:`BracketError` listing the first index without a sign change.
    """
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    fa, _ = f(a)
    fb, _ = f(b)
    bad = np.sign(fa) * np.sign(fb) > 0
    if np.any(bad):
        i = int(np.argmax(bad))
        raise BracketError(f"no sign change at index {i}: [{a.flat[i]!r}, {b.flat[i]!r}]")
    lo = np.where(fa < 0, a, b)
    hi = np.where(fa < 0, b, a)
    x = 0.5 * (a + b) if x0 is None else np.clip(np.asarray(x0, dtype=float), np.minimum(a, b), np.maximum(a, b))
    x = np.where(fa == 0, a, np.where(fb == 0, b, x))
    done = (fa == 0) | (fb == 0)
    dx_old = np.abs(b - a)
    prev = np.full(a.shape, np.inf)
    for _ in range(maxiter):
        fx, dfx = f(x)
        done |= np.abs(fx) <= ftol
        lo = np.where(fx < 0, x, lo)
        hi = np.where(fx > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = fx / dfx
        xn = x - step
        scale = np.maximum(atol, np.abs(x))
        # a noise-level Newton step means convergence, not a reason to bisect
        done |= np.isfinite(step) & (np.abs(step) <= xtol * scale)
        done |= (np.abs(step) <= 1e-8 * scale) & (np.abs(step) > 0.5 * prev)
        prev = np.where(np.isfinite(step), np.abs(step), np.inf)
        inside = np.isfinite(xn) & ((xn - lo) * (xn - hi) < 0) & (np.abs(2.0 * step) <= dx_old)
        xb = 0.5 * (lo + hi)
        x_new = np.where(inside, xn, xb)
        dx = np.abs(x_new - x)
        dx_old = np.where(inside, np.abs(step), 0.5 * np.abs(hi - lo))
        x = np.where(done, x, x_new)
        scale = np.maximum(atol, np.abs(x))
        done |= (dx <= xtol * scale) | (np.abs(hi - lo) <= xtol * scale)
        if np.all(done):
            break
    return x


def bisect_vec(f, a, b, steps: int = 60):
    """Plain vectorized bisection on sign-changing brackets; ``f`` returns values only."""
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    fa = f(a)
    for _ in range(steps):
        m = 0.5 * (a + b)
        fm = f(m)
        same = np.sign(fm) == np.sign(fa)
        a = np.where(same, m, a)
        fa = np.where(same, fm, fa)
        b = np.where(same, b, m)
    return 0.5 * (a + b)
