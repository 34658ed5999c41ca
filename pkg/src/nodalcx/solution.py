"""The constructed triple: domain Ω, solution u and source term h.

``u(x, y) = σ (U(x, y) - U(μ(|y|), y))`` where U is the closed-form
x-antiderivative of v.  With ``F(y) = U(μ(y), y)`` one has

    -(Δu + 4u) = σ (1 + F'' + 4F),   F'' = g_y² / g_c + U_yy   on the curve,

which depends on y only; that expression is the source term h.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, SourceError
from .field import DerivativeJet, Y0, eval_g, eval_g_gc, eval_U, eval_U_grid, eval_v
from .nodal import DEFAULT_WINDOW, NodalCurve, TraceResult, solve_rows
from .quadrature import adaptive_simpson

CLOSURE_TOL = 1e-12
H_WINDOW = 1e-3
H_FIT_SPAN = 0.02
# h varies on a ~0.05 scale just below s, so the top fit uses a shorter run
H_FIT_SPAN_TOP = 0.004
H_FIT_DEGREE = 4
H_AGREE_TOL = 1e-6
SIGN_PROBE = (-1.5 * math.pi, 0.0)


@dataclass(frozen=True)
class DomainOmega:
    """``Ω = {|y| < s, |x| < μ(|y|)}`` with μ polished on demand from the trace."""

    s: float
    mu: NodalCurve
    sigma: int
    epsilon: float
    perturbation: object = None
    window: float = DEFAULT_WINDOW
    _xs_table: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.sigma not in (1, -1):
            raise ValueError("sigma must be +1 or -1")
        ys = self.mu.param
        xs = np.where(ys < Y0, 2.0 * math.pi - self.mu.coord, self.mu.coord)
        object.__setattr__(self, "_xs_table", xs)

    def x_star(self, y) -> np.ndarray:
        """Zero of ``g(·, y)`` in [0, π] for ``0 <= y <= s``."""
        ya = np.asarray(y, dtype=float)
        guess = np.interp(ya, self.mu.param, self._xs_table)
        return solve_rows(ya, self.epsilon, self.perturbation, self.s, self.window, guess=guess)

    def mu_at(self, y) -> np.ndarray:
        """μ(|y|); NaN for |y| > s."""
        ya = np.abs(np.asarray(y, dtype=float))
        out = np.full(ya.shape, np.nan)
        inside = ya <= self.s
        if np.any(inside):
            yi = ya[inside]
            xs = self.x_star(yi)
            out[inside] = np.where(yi < Y0, 2.0 * math.pi - xs, xs)
        return out

    def contains(self, x, y, closed: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        m = self.mu_at(y)
        with np.errstate(invalid="ignore"):
            if closed:
                return (np.abs(y) <= self.s) & (np.abs(x) <= m + CLOSURE_TOL)
            return (np.abs(y) < self.s) & (np.abs(x) < m)

    def boundary_points(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``n`` points on ∂Ω: cosine-spaced heights, alternating sides."""
        ys = -self.s * np.cos(np.linspace(0.0, math.pi, n))
        side = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        return side * self.mu_at(ys), ys

    def bounding_box(self) -> tuple[float, float, float, float]:
        m0 = float(self.mu_at(0.0))
        return -m0, m0, -self.s, self.s


def build_domain(trace: TraceResult, eps: float, p) -> DomainOmega:
    """Ω from the trace; σ makes ``σ v > 0`` at (-3π/2, 0)."""
    v = float(eval_v(*SIGN_PROBE, eps, p).value)
    if v == 0:
        raise SourceError("v vanishes at the orientation probe")
    sigma = 1 if v > 0 else -1
    return DomainOmega(trace.s, trace.mu, sigma, eps, p, trace.window)


@dataclass(frozen=True)
class SolutionU:
    domain: DomainOmega

    @property
    def epsilon(self) -> float:
        return self.domain.epsilon

    @property
    def perturbation(self):
        return self.domain.perturbation

    def boundary_terms(self, y):
        """``(μ, F, F', F'')`` at heights y, all in closed form."""
        dom = self.domain
        yv = np.asarray(y, dtype=float)
        # one root solve per distinct height
        ya, inv = np.unique(np.abs(yv), return_inverse=True)
        m = dom.mu_at(ya)
        ju = eval_U(m, ya, dom.epsilon, dom.perturbation)
        jg, gc = eval_g_gc(m, ya, dom.epsilon, dom.perturbation)
        f2 = jg.dy**2 / gc + ju.dyy
        inv = inv.reshape(yv.shape)
        # F is even in y; F' flips sign with y
        return m[inv], ju.value[inv], np.sign(yv) * ju.dy[inv], f2[inv]

    def _check(self, x, y):
        inside = self.domain.contains(x, y, closed=True)
        if not np.all(inside):
            bad = np.argwhere(~np.atleast_1d(inside))[0]
            xb = np.atleast_1d(np.broadcast_to(x, np.shape(inside)))[tuple(bad)]
            yb = np.atleast_1d(np.broadcast_to(y, np.shape(inside)))[tuple(bad)]
            raise DomainError(f"({xb:.6g}, {yb:.6g}) is outside the closure of Ω")

    def value(self, x, y, check: bool = True):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if check:
            self._check(x, y)
        dom = self.domain
        _, f0, _, _ = self.boundary_terms(y)
        return dom.sigma * (eval_U(x, y, dom.epsilon, dom.perturbation).value - f0)

    def jet(self, x, y, check: bool = True) -> DerivativeJet:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if check:
            self._check(x, y)
        dom = self.domain
        sg = dom.sigma
        ju = eval_U(x, y, dom.epsilon, dom.perturbation)
        _, f0, f1, f2 = self.boundary_terms(y)
        return DerivativeJet(
            value=sg * (ju.value - f0),
            dx=sg * ju.dx,
            dy=sg * (ju.dy - f1),
            dxx=sg * ju.dxx,
            dxy=sg * ju.dxy,
            dyy=sg * (ju.dyy - f2),
        )

    def source_from_pde(self, y):
        """``-(Δu + 4u)`` reduced to its y-only closed form ``σ (1 + F'' + 4F)``."""
        _, f0, _, f2 = self.boundary_terms(y)
        return self.domain.sigma * (1.0 + f2 + 4.0 * f0)

    def grid(self, xs, ys) -> np.ndarray:
        """u on the tensor grid ``ys x xs``; NaN outside Ω."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        dom = self.domain
        out = np.full((ys.size, xs.size), np.nan)
        rows = np.abs(ys) < dom.s
        if not np.any(rows):
            return out
        yr = ys[rows]
        m, f0, _, _ = self.boundary_terms(yr)
        uu = dom.sigma * (eval_U_grid(xs, yr, dom.epsilon, dom.perturbation) - f0[:, None])
        mask = np.abs(xs)[None, :] < m[:, None]
        out[rows] = np.where(mask, uu, np.nan)
        return out


def eval_u(x, y, sol: SolutionU):
    """Closed-form u; raises :class:`DomainError` outside the closure of Ω."""
    return sol.value(x, y)


def eval_u_quadrature(x: float, y: float, sol: SolutionU, tol: float = 1e-12) -> float:
    """Independent route: ``σ ∫_{μ(|y|)}^x v(t, y) dt`` by adaptive Simpson."""
    sol._check(np.asarray(x), np.asarray(y))
    dom = sol.domain
    m = float(dom.mu_at(abs(y)))
    fv = lambda t: float(eval_v(t, y, dom.epsilon, dom.perturbation).value)
    return dom.sigma * adaptive_simpson(fv, m, float(x), tol)


# --- source term -----------------------------------------------------------------


@dataclass(frozen=True)
class SourceH:
    """h on [0, s] (evaluated at |y|), with pinned values at π/√3 and s."""

    y: np.ndarray
    h: np.ndarray
    s: float
    h_at_s: float
    extrapolation: dict
    _spline: CubicSpline = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        sp = CubicSpline(self.y, self.h, bc_type=((1, 0.0), "not-a-knot"))
        object.__setattr__(self, "_spline", sp)

    def __call__(self, y):
        ya = np.abs(np.asarray(y, dtype=float))
        if np.any(ya > self.s * (1 + 1e-15)):
            raise DomainError("h is only recorded on [-s, s]")
        return self._spline(np.minimum(ya, self.s))

    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        """The samples mirrored onto [-s, s]."""
        y = np.concatenate([-self.y[:0:-1], self.y])
        return y, np.concatenate([self.h[:0:-1], self.h])

    def write_csv(self, path) -> None:
        y, h = self.samples()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", "h"])
            for a, b in zip(y, h):
                w.writerow([format(float(a), ".17g"), format(float(b), ".17g")])


def h_on_curve(sol: SolutionU, y) -> np.ndarray:
    """``σ (v_y μ' - v_x)`` at ``(μ(y), y)`` with ``μ' = -v_y / v_x``: the raw formula."""
    dom = sol.domain
    ya = np.abs(np.asarray(y, dtype=float))
    m = dom.mu_at(ya)
    jv = eval_v(m, ya, dom.epsilon, dom.perturbation)
    mup = -jv.dy / jv.dx
    return dom.sigma * (jv.dy * mup - jv.dx)


def h_smooth(sol: SolutionU, y) -> np.ndarray:
    """``σ (g_x² + g_y²) / g_c`` on the curve: the same h without any 0/0."""
    dom = sol.domain
    ya = np.abs(np.asarray(y, dtype=float))
    m = dom.mu_at(ya)
    jg, gc = eval_g_gc(m, ya, dom.epsilon, dom.perturbation)
    return dom.sigma * (jg.dx**2 + jg.dy**2) / gc


def h_limit_at_s(sol: SolutionU) -> float:
    """``-σ g_y(0, s)² / g_xx(0, s)``, the limit of h at the top of Ω."""
    dom = sol.domain
    j = eval_g(0.0, dom.s, dom.epsilon, dom.perturbation)
    return float(-dom.sigma * j.dy**2 / j.dxx)


def _fit(ys, hs, degree=H_FIT_DEGREE):
    return np.polynomial.Polynomial.fit(ys, hs, degree)


def build_h(sol: SolutionU, trace: TraceResult, n_window: int = 9) -> SourceH:
    """Sample h on the trace heights; fill the windows around π/√3 and s by
    degree-4 extrapolation from either side and pin h(π/√3) = 0 and h(s)."""
    s = trace.s
    ys = trace.mu.param
    w = H_WINDOW
    in_y0 = np.abs(ys - Y0) < w
    in_s = ys > s - w
    keep = ~(in_y0 | in_s)
    yk = ys[keep]
    hk = h_on_curve(sol, yk)

    left = (yk >= Y0 - w - H_FIT_SPAN) & (yk <= Y0 - w)
    right = (yk >= Y0 + w) & (yk <= Y0 + w + H_FIT_SPAN)
    top = (yk >= s - w - H_FIT_SPAN_TOP) & (yk <= s - w)
    for name, sel in (("left", left), ("right", right), ("top", top)):
        if np.count_nonzero(sel) < H_FIT_DEGREE + 2:
            raise SourceError(f"too few samples to extrapolate h from the {name} of its window")
    pl, pr, pt = _fit(yk[left], hk[left]), _fit(yk[right], hk[right]), _fit(yk[top], hk[top])
    h_s = h_limit_at_s(sol)
    info = {
        "y0_left": float(pl(Y0)),
        "y0_right": float(pr(Y0)),
        "s_extrapolated": float(pt(s)),
        "s_limit": h_s,
    }
    if abs(info["y0_left"] - info["y0_right"]) > H_AGREE_TOL:
        raise SourceError(f"h extrapolations disagree at π/√3: {info['y0_left']:.3g} vs {info['y0_right']:.3g}")
    if abs(info["s_extrapolated"] - h_s) > H_AGREE_TOL:
        raise SourceError(f"h extrapolation {info['s_extrapolated']:.3g} misses the limit {h_s:.3g} at s")

    wl = np.linspace(Y0 - w, Y0, n_window)[1:-1]
    wr = np.linspace(Y0, Y0 + w, n_window)[1:-1]
    wt = np.linspace(s - w, s, n_window)[1:-1]
    y_all = np.concatenate([yk, wl, [Y0], wr, wt, [s]])
    h_all = np.concatenate([hk, pl(wl), [0.0], pr(wr), pt(wt), [h_s]])
    order = np.argsort(y_all)
    y_all, h_all = y_all[order], h_all[order]
    # thin out nodes closer than 1e-9: the spline does not need them
    sel = np.concatenate([[True], np.diff(y_all) > 1e-9])
    sel[-1] = True
    y_all, h_all = y_all[sel], h_all[sel]
    if np.diff(y_all).min() <= 0:
        raise SourceError("h sample heights are not strictly increasing")
    return SourceH(y_all, h_all, s, h_s, info)


def residual_h(sol: SolutionU, y: float, x_list, fd_step: float = 1e-3) -> tuple[float, np.ndarray]:
    """``-(Δu + 4u)`` at ``(x, y)`` for each x, with ``F''`` by fourth-order
    central differences of ``F(y) = U(μ(y), y)``.  Returns ``(spread, values)``."""
    dom = sol.domain
    x = np.asarray(x_list, dtype=float)
    yv = np.full_like(x, float(y))
    sol._check(x, yv)
    offs = np.array([-2, -1, 0, 1, 2]) * fd_step
    yy = float(y) + offs
    m = dom.mu_at(yy)
    F = eval_U(m, yy, dom.epsilon, dom.perturbation).value
    f2 = (-F[0] + 16 * F[1] - 30 * F[2] + 16 * F[3] - F[4]) / (12 * fd_step**2)
    ju = eval_U(x, yv, dom.epsilon, dom.perturbation)
    lap = ju.dxx + ju.dyy + 4.0 * ju.value
    vals = dom.sigma * (-lap + f2 + 4.0 * F[2])
    return float(vals.max() - vals.min()), vals
