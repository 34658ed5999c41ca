"""Tracing the zero set of g: the height s, the boundary curve x = μ(y) and
the interior nodal curve.

For y in [0, s] the factored field has exactly one zero ``x*(y)`` in
[0, π]; below z0 it is the reflection ``2π - μ(y)``, above z0 it is μ(y)
itself.  ``x*`` degenerates into a double root of ``x ↦ g`` wherever it meets
a line of symmetry (x = 0 near y = 0 and y = s, x = π at z0).  In those
windows the root is sought in the squared distance to the symmetry line,
where it is simple because g is even about that line.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import TraceError
from .field import Y0, Y2, eval_g, eval_g_gc
from .roots import BracketError, rtsafe, rtsafe_vec

BY_Y = "BY_Y"
BY_X = "BY_X"
RESIDUAL_TOL = 1e-10
DEFAULT_WINDOW = 0.05
DEFAULT_SAMPLES = 801
REFINE = 10
GRADE_LEVELS = 30


@dataclass(frozen=True)
class NodalCurve:
    """Ordered zero-curve samples; ``coord`` is x for BY_Y curves and y for BY_X."""

    axis: str
    param: np.ndarray
    coord: np.ndarray
    tangents: np.ndarray | None = None

    def __post_init__(self):
        if self.axis not in (BY_Y, BY_X):
            raise ValueError(f"unknown axis {self.axis!r}")
        if len(self.param) != len(self.coord):
            raise ValueError("param and coord lengths differ")

    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        if self.axis == BY_Y:
            return self.coord, self.param
        return self.param, self.coord

    def __len__(self):
        return len(self.param)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param", "coord"])
            for a, b in zip(self.param, self.coord):
                w.writerow([format(float(a), ".17g"), format(float(b), ".17g")])

    @classmethod
    def read_csv(cls, path, axis: str = BY_Y) -> "NodalCurve":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(axis, data[:, 0].copy(), data[:, 1].copy())


@dataclass(frozen=True)
class TraceResult:
    s: float
    mu: NodalCurve
    interior: NodalCurve
    epsilon: float
    window: float


# --- s -------------------------------------------------------------------------


def find_s(eps: float, p) -> float:
    """Root of ``y ↦ g(0, y)`` in (π/√3, 2π/√3) with ``g_y(0, s) > 0``."""

    def f(y):
        j = eval_g(0.0, y, eps, p)
        return float(j.value), float(j.dy)

    lo, hi = Y0, Y2
    flo, fhi = f(lo)[0], f(hi)[0]
    if not (flo < 0 < fhi):
        raise TraceError(f"g(0, y) has no sign change on (π/√3, 2π/√3): g = {flo:.3g}, {fhi:.3g}")
    # bisection to 1e-12, then a safeguarded Newton polish inside the final bracket
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if f(mid)[0] < 0:
            lo = mid
        else:
            hi = mid
    s = rtsafe(f, lo, hi, 0.5 * (lo + hi))
    val, gy = f(s)
    if not gy > 0:
        raise TraceError(f"g_y(0, s) = {gy:.3g} is not positive")
    return s


# --- sample grid ---------------------------------------------------------------


def sample_grid(s: float, n_samples: int, window: float) -> np.ndarray:
    """Cosine-spaced nodes on [0, s], refined near π/√3 and s, graded toward s.

    Contains 0, π/√3 and s exactly; the base nodes for ``2n - 1`` samples
    contain those for ``n``.
    """
    if n_samples < 16:
        raise ValueError("n_samples must be >= 16")
    base = 0.5 * s * (1.0 - np.cos(np.linspace(0.0, math.pi, n_samples)))
    extra = []
    for centre, lo, hi in ((Y0, Y0 - window, Y0 + window), (s, s - window, s)):
        count = int(np.count_nonzero((base >= lo) & (base <= hi)))
        m = REFINE * max(count, 2)
        extra.append(np.linspace(lo, hi, m + 1))
    extra.append(s - window * np.exp2(-np.arange(1, GRADE_LEVELS + 1)))
    ys = np.concatenate([base, *extra, [0.0, Y0, s]])
    ys = ys[(ys >= 0.0) & (ys <= s)]
    ys = np.unique(ys)
    # drop near-duplicates created by merging, but never the pinned nodes
    keep = np.concatenate([[True], np.diff(ys) > 1e-13])
    ys = ys[keep]
    for pin in (Y0, s):
        i = int(np.argmin(np.abs(ys - pin)))
        ys[i] = pin
    return ys


# --- row solves ----------------------------------------------------------------

_T_MAX = (0.5 * math.pi) ** 2


def _x_of(mode: str, t: float) -> float:
    if mode == "x":
        return t
    if mode == "q":
        return math.pi - math.sqrt(max(t, 0.0))
    return math.sqrt(max(t, 0.0))


def _t_of(mode: str, x: float) -> float:
    if mode == "x":
        return x
    if mode == "q":
        return (math.pi - x) ** 2
    return x * x


def _row_fn(mode: str, y: float, eps: float, p):
    """``t ↦ (g, dg/dt)`` along the row at height y, in the working variable."""

    def f(t):
        x = _x_of(mode, t)
        j, gc = eval_g_gc(x, y, eps, p)
        val = float(j.value)
        if mode == "x":
            return val, float(j.dx)
        r = math.sqrt(max(t, 0.0))
        sinc = math.sin(r) / r if r > 0 else 1.0
        if mode == "q":
            return val, 0.5 * float(gc) * sinc
        return val, -0.5 * float(gc) * sinc

    return f


def _mode_for(y: float, s: float, window: float) -> str:
    if y < window or y > s - window:
        return "p"
    if abs(y - Y0) < window:
        return "q"
    return "x"


def _t_range(mode: str) -> tuple[float, float]:
    return (0.0, math.pi) if mode == "x" else (0.0, _T_MAX)


def _slope_x(x, y, eps, p) -> float:
    """``dx*/dy = -g_y / g_x`` on the curve (0 if g_x vanishes)."""
    j = eval_g(x, y, eps, p)
    gx = float(j.dx)
    return -float(j.dy) / gx if gx != 0 else 0.0


def _corrector(f, t_pred: float, width: float, rng: tuple[float, float], y: float) -> float:
    lo_lim, hi_lim = rng
    w = max(width, 1e-14 * (hi_lim - lo_lim))
    while True:
        a = max(lo_lim, t_pred - w)
        b = min(hi_lim, t_pred + w)
        fa, fb = f(a)[0], f(b)[0]
        if fa == 0:
            return a
        if fb == 0:
            return b
        if math.copysign(1.0, fa) != math.copysign(1.0, fb):
            return rtsafe(f, a, b, t_pred)
        if a == lo_lim and b == hi_lim:
            raise TraceError(f"lost the bracket at y = {y!r}")
        w *= 2.0


def trace_mu(
    eps: float,
    p,
    n_samples: int = DEFAULT_SAMPLES,
    s: float | None = None,
    window: float = DEFAULT_WINDOW,
    strict: bool = True,
) -> NodalCurve:
    """Continuation of ``x*(y)`` up the y-grid, returned as μ on [0, s].

    Predictor: previous root plus the tangent step ``-g_y/g_x`` (converted to
    the working variable).  Corrector: safeguarded Newton inside a bracket of
    width twice the predicted step, widened by doubling when it does not
    change sign.  ``strict=False`` skips the residual and monotonicity
    validation, for measuring how far an uncertified ε drifts.
    """
    if s is None:
        s = find_s(eps, p)
    ys = sample_grid(s, n_samples, window)
    xs = np.empty_like(ys)
    x_prev = None
    slope_prev = 0.0
    y_prev = 0.0
    for i, y in enumerate(ys):
        y = float(y)
        if y == Y0:
            xs[i] = math.pi
        elif y == s:
            xs[i] = 0.0
        else:
            mode = _mode_for(y, s, window)
            f = _row_fn(mode, y, eps, p)
            if x_prev is None:
                # first node y = 0: the root is tiny (g(0,0) = -ε ψ̃(0,0)), search the whole range
                t = _corrector(f, 0.0, _T_MAX, _t_range(mode), y)
            else:
                x_pred = min(max(x_prev + (y - y_prev) * slope_prev, 0.0), math.pi)
                t_pred = _t_of(mode, x_pred)
                t_old = _t_of(mode, x_prev)
                t = _corrector(f, t_pred, 2.0 * abs(t_pred - t_old), _t_range(mode), y)
            xs[i] = _x_of(mode, t)
        slope_prev = _slope_x(xs[i], y, eps, p) if y not in (Y0, s) else 0.0
        if not math.isfinite(slope_prev) or abs(slope_prev) > 1e6:
            slope_prev = 0.0
        x_prev = float(xs[i])
        y_prev = y
    mu = np.where(ys < Y0, 2.0 * math.pi - xs, xs)
    mu[ys == Y0] = math.pi
    mu[ys == s] = 0.0
    if strict:
        _validate_mu(ys, mu, s, eps, p)
    return NodalCurve(BY_Y, ys, mu, curve_tangents(ys, mu, s, eps, p))


def _validate_mu(ys, mu, s, eps, p) -> None:
    res = np.abs(eval_g(mu, ys, eps, p).value)
    if res.max() > RESIDUAL_TOL:
        i = int(np.argmax(res))
        raise TraceError(f"|g| = {res[i]:.3g} > {RESIDUAL_TOL:g} at y = {ys[i]!r}")
    d = np.diff(mu)
    if np.any(d >= 0):
        i = int(np.argmax(d >= 0))
        raise TraceError(f"μ not strictly decreasing between y = {ys[i]!r} and {ys[i + 1]!r}")
    inner = ys < s
    if not (np.all(mu[inner] > 0) and np.all(mu[inner] < 2 * math.pi)):
        raise TraceError("μ leaves (0, 2π) on [0, s)")


def saddle_slope(eps: float, p) -> float:
    """dμ/dy at z0: the decreasing branch of the Hessian's null cone."""
    h = eval_g(math.pi, Y0, eps, p).hessian()
    a, b, c = h[0, 0], h[0, 1], h[1, 1]
    # a X² + 2 b X Y + c Y² = 0 with X = dx, Y = dy; slopes X/Y
    disc = math.sqrt(max(b * b - a * c, 0.0))
    roots = [(-b + disc) / a, (-b - disc) / a]
    return min(roots)


def curve_tangents(ys, mu, s, eps, p) -> np.ndarray:
    """Unit tangents (dx, dy) oriented with increasing y."""
    j = eval_g(mu, ys, eps, p)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        slope = -j.dy / j.dx
        slope[ys == Y0] = saddle_slope(eps, p)
        tx = slope / np.sqrt(1.0 + slope**2)
        ty = 1.0 / np.sqrt(1.0 + slope**2)
    top = (ys == s) | ~np.isfinite(slope)
    tx[top] = -1.0
    ty[top] = 0.0
    return np.stack([tx, ty], axis=1)


def derive_interior(mu: NodalCurve, eps: float, p) -> NodalCurve:
    """Reflect μ on |y| < π/√3 through x = 2π - x and extend evenly in y."""
    ys, m = mu.param, mu.coord
    sel = ys <= Y0
    y_up, x_up = ys[sel], 2.0 * math.pi - m[sel]
    neg = y_up > 0
    y_all = np.concatenate([-y_up[neg][::-1], y_up])
    x_all = np.concatenate([x_up[neg][::-1], x_up])
    res = np.abs(eval_g(x_all, y_all, eps, p).value)
    if res.max() > RESIDUAL_TOL:
        i = int(np.argmax(res))
        raise TraceError(f"reflected curve misses the zero set: |g| = {res[i]:.3g} at y = {y_all[i]!r}")
    tang = None
    if mu.tangents is not None:
        t_up = mu.tangents[sel] * np.array([-1.0, 1.0])
        t_neg = (mu.tangents[sel][neg] * np.array([1.0, 1.0]))[::-1]
        tang = np.concatenate([t_neg, t_up])
    return NodalCurve(BY_Y, y_all, x_all, tang)


def trace(eps: float, p, n_samples: int = DEFAULT_SAMPLES, window: float = DEFAULT_WINDOW) -> TraceResult:
    s = find_s(eps, p)
    mu = trace_mu(eps, p, n_samples, s=s, window=window)
    return TraceResult(s=s, mu=mu, interior=derive_interior(mu, eps, p), epsilon=eps, window=window)


def unperturbed_trace(n_samples: int = DEFAULT_SAMPLES, window: float = DEFAULT_WINDOW) -> TraceResult:
    """The ε = 0 trace through the same machinery: s = 2π/√3 and μ = 2π - √3 y.

    Validation is skipped because μ(0) = 2π there, the degenerate end of the
    family rather than an admissible member of it.
    """
    mu = trace_mu(0.0, None, n_samples, s=Y2, window=window, strict=False)
    return TraceResult(s=Y2, mu=mu, interior=derive_interior(mu, 0.0, None), epsilon=0.0, window=window)


# --- local curves at z1 and z2 ------------------------------------------------


def local_xi_eta(eps: float, p, alpha: float, beta: float, gamma: float, delta: float, n: int = 201):
    """ξ(y) on [0, β] near z1 and η(x) on [0, γ] near z2, with their sign checks."""
    ys = np.linspace(0.0, beta, n)

    def fxi(t):
        x = np.sqrt(np.maximum(t, 0.0))
        j, gc = eval_g_gc(x, ys, eps, p)
        sinc = np.sinc(x / math.pi)
        return j.value, -0.5 * gc * sinc

    try:
        t = rtsafe_vec(fxi, np.zeros_like(ys), np.full_like(ys, alpha * alpha))
    except BracketError as exc:
        raise TraceError(f"ξ: {exc}") from exc
    xi = np.sqrt(t)

    xs = np.linspace(0.0, gamma, n)

    def feta(y):
        j = eval_g(xs, y, eps, p)
        return j.value, j.dy

    try:
        eta = rtsafe_vec(feta, np.full_like(xs, Y2 - delta), np.full_like(xs, Y2))
    except BracketError as exc:
        raise TraceError(f"η: {exc}") from exc

    if not np.all(np.diff(xi) > 0):
        raise TraceError("ξ' > 0 fails on (0, β]")
    if not np.all(np.diff(eta) < 0):
        raise TraceError("η' < 0 fails on (0, γ]")
    h = xs[1]
    if not 2.0 * (eta[1] - eta[0]) / (h * h) < 0:
        raise TraceError("η''(0) < 0 fails")
    return NodalCurve(BY_Y, ys, xi), NodalCurve(BY_X, xs, eta)


# --- vectorized row solve (used for on-demand μ evaluation) -------------------


def _row_fn_vec(mode: str, yy: np.ndarray, eps: float, p):
    def f(t):
        if mode == "x":
            j = eval_g(t, yy, eps, p)
            return j.value, j.dx
        r = np.sqrt(np.maximum(t, 0.0))
        x = math.pi - r if mode == "q" else r
        j, gc = eval_g_gc(x, yy, eps, p)
        return j.value, (0.5 if mode == "q" else -0.5) * gc * np.sinc(r / math.pi)

    return f


def solve_rows(y, eps: float, p, s: float, window: float = DEFAULT_WINDOW, guess=None) -> np.ndarray:
    """``x*(y)`` in [0, π] for an array of heights ``0 <= y <= s``.

    Same working variables as the tracer; ``guess`` (in x) seeds the Newton
    iterations.  A row whose value on the symmetry line has already reached
    zero returns the symmetry line itself.
    """
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    modes = np.where((y < window) | (y > s - window), "p", np.where(np.abs(y - Y0) < window, "q", "x"))
    for mode in ("x", "q", "p"):
        sel = modes == mode
        if not np.any(sel):
            continue
        yy = y[sel]
        hi_lim = math.pi if mode == "x" else _T_MAX
        t0 = None
        if guess is not None:
            gx = guess[sel]
            t0 = gx if mode == "x" else (math.pi - gx) ** 2 if mode == "q" else gx * gx
        if mode == "x":
            live = np.ones(yy.shape, dtype=bool)
        else:
            f_end = _row_fn_vec(mode, yy, eps, p)(np.zeros_like(yy))[0]
            live = f_end > 0 if mode == "q" else f_end < 0
        t = np.zeros_like(yy)
        if np.any(live):
            f = _row_fn_vec(mode, yy[live], eps, p)
            n = int(np.count_nonzero(live))
            try:
                t[live] = rtsafe_vec(f, np.zeros(n), np.full(n, hi_lim), None if t0 is None else t0[live])
            except BracketError as exc:
                raise TraceError(f"row solve ({mode}): {exc}") from exc
        out[sel] = t if mode == "x" else (math.pi - np.sqrt(t) if mode == "q" else np.sqrt(t))
    out[y == Y0] = math.pi
    out[y == s] = 0.0
    return out
