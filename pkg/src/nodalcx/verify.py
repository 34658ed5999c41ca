"""Verification suite for a constructed (Ω, u, h) and its figures.

Every check reports ``{pass, worst_residual, location, tolerance}``.  A
check passes iff ``worst_residual <= tolerance``, so loosening a tolerance
can never turn a pass into a failure.  Random samples come from a seeded
generator, which keeps reports bit-identical between runs.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .coeffs import RESIDUAL_TOL as SYSTEM_TOL
from .coeffs import constraint_residuals, verify_w_conditions
from .epsilon import evaluate_epsilon
from .errors import ConfigError
from .field import SQRT3, Y0, Y2, eval_g, eval_v, eval_w
from .nodal import TraceResult, unperturbed_trace
from .roots import bisect_vec
from .solution import SolutionU, SourceH, build_domain, build_h, h_smooth, residual_h

SINGULAR_GAP = 1e-2
PER_ROW = 100


@dataclass(frozen=True)
class ReportConfig:
    seed: int = 0
    helmholtz_points: int = 100_000
    pde_points: int = 100_000
    boundary_points: int = 10_000
    nonneg_grid: int = 2001
    topology_grid: int = 1001
    zero_set_grid: int = 1001
    zero_set_distance: float = 0.1
    ray_radius: float = 1e-3
    ray_samples: int = 7200
    oracle_grid: int = 801
    tol_helmholtz: float = 1e-11
    tol_system: float = SYSTEM_TOL
    tol_mu_z0: float = 1e-9
    tol_angle_deg: float = 1.0
    tol_nonneg: float = 1e-11
    tol_dirichlet: float = 1e-10
    tol_neumann: float = 1e-8
    tol_pde: float = 1e-6
    tol_zero_set: float = 1e-6
    tol_h_even: float = 1e-12
    tol_h_spread: float = 1e-6
    tol_h_agree: float = 1e-6
    tol_h_pin: float = 1e-6
    tol_symmetry: float = 1e-10
    tol_oracle_u: float = 1e-10
    tol_oracle_h: float = 1e-8

    def __post_init__(self):
        for name, val in self.__dict__.items():
            if name.startswith("tol_") and not val > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("nonneg_grid", "topology_grid", "zero_set_grid", "oracle_grid"):
            if getattr(self, name) < 64:
                raise ConfigError(f"{name} must be at least 64")


@dataclass(frozen=True)
class Check:
    passed: bool
    worst_residual: float
    location: tuple | None
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "worst_residual": _num(self.worst_residual),
            "location": None if self.location is None else [_num(v) for v in self.location],
            "tolerance": _num(self.tolerance),
            "details": _jsonable(self.details),
        }


@dataclass
class VerificationReport:
    checks: dict[str, Check]
    provenance: str | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "provenance": self.provenance,
            "checks": {k: c.to_dict() for k, c in self.checks.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _num(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return format(float(v), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, type(None))):
        return obj
    return _num(obj)


def _check(worst, tol, location=None, **details) -> Check:
    worst = float(worst)
    ok = bool(worst <= tol) if math.isfinite(worst) else False
    loc = None if location is None else tuple(float(v) for v in location)
    return Check(ok, worst, loc, float(tol), details)


def manifest_hash(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


# --- individual checks -----------------------------------------------------------


def helmholtz_check(eps, p, n, seed, tol) -> Check:
    """``|Δv + 4v| / (1 + |v|)`` at random points of the fundamental cell."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2 * math.pi, 2 * math.pi, n)
    y = rng.uniform(-Y2, Y2, n)
    j = eval_v(x, y, eps, p)
    r = np.abs(j.helmholtz_defect()) / (1.0 + np.abs(j.value))
    i = int(np.argmax(r))
    return _check(r[i], tol, (x[i], y[i]), points=n)


def equal_angle_rays(eps, p, radius, n) -> np.ndarray:
    """Angles (radians, ascending) where v changes sign on a circle about z0."""
    th = np.linspace(0.0, 2 * math.pi, n, endpoint=False)

    def vcirc(t):
        return eval_v(math.pi + radius * np.cos(t), Y0 + radius * np.sin(t), eps, p).value

    f = vcirc(th)
    th2 = np.roll(th, -1)
    th2[-1] += 2 * math.pi
    idx = np.nonzero(f * np.roll(f, -1) < 0)[0]
    # samples that land exactly on a ray count once, not as two sign changes
    exact = th[f == 0]
    found = bisect_vec(vcirc, th[idx], th2[idx]) if idx.size else np.empty(0)
    return np.sort(np.mod(np.concatenate([found, exact]), 2 * math.pi))


def equal_angle_check(eps, p, radius, n, tol_deg) -> Check:
    ang = equal_angle_rays(eps, p, radius, n)
    if ang.size != 6:
        return Check(False, math.inf, (math.pi, Y0), tol_deg, {"rays": int(ang.size)})
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
    dev = np.degrees(np.abs(gaps - math.pi / 3))
    return _check(dev.max(), tol_deg, (math.pi, Y0), rays=6, radius=radius, angles_deg=list(np.degrees(ang)))


def mu_checks(sol: SolutionU, trace: TraceResult, tol) -> dict[str, Check]:
    dom = sol.domain
    s = trace.s
    ys, mu = trace.mu.param, trace.mu.coord
    d = np.diff(mu)
    i = int(np.argmax(d))
    mu0 = float(dom.mu_at(Y0))
    out = {
        "s_range": _check(
            0.0 if Y0 < s < Y2 else max(Y0 - s, s - Y2), 0.0, (0.0, s), s=s, lower=Y0, upper=Y2
        ),
        "mu_at_z0": _check(max(abs(mu0 - math.pi), abs(float(np.interp(Y0, ys, mu)) - math.pi)), tol, (mu0, Y0)),
        "mu_endpoints": _check(
            max(abs(float(dom.mu_at(s))), abs(float(eval_g(float(dom.mu_at(0.0)), 0.0, dom.epsilon, dom.perturbation).value))),
            tol,
            (0.0, s),
            mu_0=float(dom.mu_at(0.0)),
        ),
    }
    # strictly decreasing: every step negative; the largest step is the residual
    out["mu_decreasing"] = Check(bool(d[i] < 0), float(d[i]), (float(mu[i]), float(ys[i])), 0.0, {"samples": int(mu.size)})
    return out


def _inside_rows(dom, xs, ys):
    m = dom.mu_at(ys)
    return np.abs(xs)[None, :] < m[:, None]


def topology_grid(dom, n: int) -> tuple[np.ndarray, np.ndarray, dict]:
    """An ``n x n`` grid over the bounding box of Ω that resolves the neck at the origin.

    The two columns next to x = 0 are moved to ``±neck/4``, where ``neck``
    is the measured half-gap between the interior curves at y = 0.  Without
    that, the regions on either side of the neck merge or split at pixel
    level regardless of how fine the uniform grid is.
    """
    x0, x1, y0, y1 = dom.bounding_box()
    n = n | 1
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    xs[n // 2] = 0.0
    ys[n // 2] = 0.0
    neck = 2 * math.pi - float(dom.mu_at(0.0))
    delta = 0.25 * neck
    xs[n // 2 - 1], xs[n // 2 + 1] = -delta, delta
    return xs, ys, {"grid": [n, n], "neck": neck, "neck_columns": delta}


def _interface(lab_sign, inside):
    """Pixels inside Ω with a 4-neighbour inside Ω of the opposite sign."""
    pos = (lab_sign > 0) & inside
    neg = (lab_sign < 0) & inside
    out = np.zeros_like(inside)
    for sh, ax in ((1, 0), (-1, 0), (1, 1), (-1, 1)):
        nb_neg = np.roll(neg, sh, axis=ax)
        edge = np.zeros_like(inside)
        if ax == 0:
            sl = slice(1, None) if sh == 1 else slice(None, -1)
            edge[sl, :] = True
        else:
            sl = slice(1, None) if sh == 1 else slice(None, -1)
            edge[:, sl] = True
        out |= pos & nb_neg & edge
    return out


def nodal_topology(sol: SolutionU, n: int) -> dict:
    """Flood-fill counts on the topology grid.

    ``domains_u``: 4-connected components of constant sign of g inside Ω
    (u vanishes in Ω exactly where g does).  ``curves_u``: 8-connected
    components of the positive-side pixels of the g interface.
    ``regions_v``: 4-connected components of ``{v > 0}`` and ``{v < 0}``.
    """
    dom = sol.domain
    xs, ys, meta = topology_grid(dom, n)
    X, Y = np.meshgrid(xs, ys)
    inside = _inside_rows(dom, xs, ys)
    sg = np.sign(eval_g(X, Y, dom.epsilon, dom.perturbation).value)
    sv = np.sign(eval_v(X, Y, dom.epsilon, dom.perturbation).value)
    four = ndimage.generate_binary_structure(2, 1)
    eight = ndimage.generate_binary_structure(2, 2)

    def count(mask, st):
        return int(ndimage.label(mask, structure=st)[1])

    dom_u = count((sg > 0) & inside, four) + count((sg < 0) & inside, four)
    curves = count(_interface(sg, inside), eight)
    reg_v = count((sv > 0) & inside, four) + count((sv < 0) & inside, four)
    return {"domains_u": dom_u, "curves_u": curves, "regions_v": reg_v, **meta}


def topology_checks(sol, n) -> dict[str, Check]:
    fine = nodal_topology(sol, n)
    coarse = nodal_topology(sol, max(64, n // 2))
    loc = (0.0, 0.0)
    mism = sum(fine[k] != coarse[k] for k in ("domains_u", "curves_u", "regions_v"))
    return {
        "interior_nodal_curves": _check(abs(fine["curves_u"] - 2), 0, loc, found=fine["curves_u"], **_meta(fine)),
        "nodal_domains": _check(abs(fine["domains_u"] - 3), 0, loc, found=fine["domains_u"]),
        "v_sign_regions": _check(abs(fine["regions_v"] - 6), 0, loc, found=fine["regions_v"]),
        "topology_refinement": _check(mism, 0, loc, coarse_grid=coarse["grid"], fine_grid=fine["grid"]),
    }


def _meta(d):
    return {k: d[k] for k in ("grid", "neck", "neck_columns")}


def nonnegativity_check(sol, n, tol) -> tuple[Check, float]:
    x0, x1, y0, y1 = sol.domain.bounding_box()
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    U = sol.grid(xs, ys)
    umax = float(np.nanmax(U))
    i = np.nanargmin(U)
    r, c = np.unravel_index(i, U.shape)
    worst = max(0.0, -float(U[r, c])) / umax
    return _check(worst, tol, (xs[c], ys[r]), grid=[n, n], u_max=umax, inside=int(np.count_nonzero(~np.isnan(U)))), umax


def boundary_checks(sol, n, umax, tol_d, tol_n, seed) -> dict[str, Check]:
    dom = sol.domain
    bx, by = dom.boundary_points(n)
    jb = sol.jet(bx, by)
    du = np.abs(jb.value) / umax
    i = int(np.argmax(du))
    # scale for the gradient: |∇u| = |v| over a grid of interior points
    rng = np.random.default_rng(seed + 1)
    ys = rng.uniform(-dom.s, dom.s, 20000)
    xs = rng.uniform(-1.0, 1.0, ys.size) * dom.mu_at(ys)
    ji = sol.jet(xs, ys, check=False)
    gmax = float(ji.gradient_norm().max())
    gn = jb.gradient_norm() / gmax
    k = int(np.argmax(gn))
    return {
        "dirichlet": _check(du[i], tol_d, (bx[i], by[i]), samples=n),
        "neumann": _check(gn[k], tol_n, (bx[k], by[k]), samples=n, grad_max=gmax),
    }


def _away_from_singular(y, s, gap):
    a = np.abs(y)
    return (np.abs(a - Y0) >= gap) & (s - a >= gap)


def pde_check(sol, h: SourceH, n, seed, tol) -> Check:
    dom = sol.domain
    rng = np.random.default_rng(seed + 2)
    # random heights, PER_ROW random abscissae on each
    rows = -(-n // PER_ROW)
    yr = rng.uniform(-dom.s, dom.s, int(rows * 1.1) + 16)
    yr = yr[_away_from_singular(yr, dom.s, SINGULAR_GAP)][:rows]
    ys = np.repeat(yr, PER_ROW)[:n]
    xs = rng.uniform(-1.0, 1.0, ys.size) * np.repeat(dom.mu_at(yr), PER_ROW)[:n]
    j = sol.jet(xs, ys, check=False)
    hv = h(ys)
    r = np.abs(j.helmholtz_defect() + hv) / (1.0 + np.abs(hv))
    i = int(np.argmax(r))
    return _check(r[i], tol, (xs[i], ys[i]), samples=int(ys.size), gap=SINGULAR_GAP)


def zero_set_check(sol, trace, n, dist, tol) -> Check:
    """u small on the interior curves; u > tol·max u farther than ``dist`` from the zero set."""
    dom = sol.domain
    x0, x1, y0, y1 = dom.bounding_box()
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    U = sol.grid(xs, ys)
    umax = float(np.nanmax(U))
    cx, cy = trace.interior.xy()
    on_curves = np.abs(sol.value(np.concatenate([cx, -cx]), np.concatenate([cy, cy]))) / umax
    bx, by = dom.boundary_points(4000)
    pts = np.concatenate(
        [np.stack([cx, cy], 1), np.stack([-cx, cy], 1), np.stack([bx, by], 1), np.stack([-bx, by], 1)]
    )
    tree = cKDTree(pts)
    X, Y = np.meshgrid(xs, ys)
    sel = ~np.isnan(U)
    dd, _ = tree.query(np.stack([X[sel], Y[sel]], 1))
    far = dd > dist
    uf = U[sel][far] / umax
    i = int(np.argmin(uf))
    # residual: how far the far-field minimum falls below the floor
    worst = max(0.0, tol - float(uf[i]))
    loc = (X[sel][far][i], Y[sel][far][i])
    ok = worst == 0.0 and float(on_curves.max()) <= 1e-10
    c = _check(worst, 0.0, loc, far_min=float(uf[i]), floor=tol, on_curves=float(on_curves.max()), distance=dist, grid=[n, n])
    return Check(ok, c.worst_residual, c.location, c.tolerance, c.details)


def h_checks(sol, trace, h: SourceH, cfg: ReportConfig) -> dict[str, Check]:
    dom = sol.domain
    heights = [0.2, 0.4, 0.8, 1.2, 1.6, 2.2, 2.8, 3.3]
    heights = [y for y in heights if y < dom.s - 0.05 and abs(y - Y0) > 0.05]
    spreads, even, agree = [], [], []
    for y in heights:
        m = float(dom.mu_at(y))
        xl = np.linspace(-0.8, 0.8, 5) * m
        sp, vals = residual_h(sol, y, xl)
        spreads.append((sp, y))
        # closed-form -(Δu + 4u) at mirrored heights
        up = -sol.jet(xl, np.full_like(xl, y)).helmholtz_defect()
        dn = -sol.jet(xl, np.full_like(xl, -y)).helmholtz_defect()
        even.append((float(np.max(np.abs(up - dn))), y))
        agree.append((float(np.max(np.abs(vals - h(y)))), y))
    ws = max(spreads)
    we = max(even)
    wa = max(agree)
    yy, hh = h.samples()
    sample_even = float(np.max(np.abs(hh - hh[::-1])))
    pins = [abs(h.extrapolation["y0_left"]), abs(h.extrapolation["y0_right"])]
    pin_worst = max(pins)
    # spline between samples against the singularity-free formula
    probe = np.linspace(-dom.s, dom.s, 4001)
    probe = probe[_away_from_singular(probe, dom.s, 2e-3)]
    interp = float(np.max(np.abs(h(probe) - h_smooth(sol, probe))))
    return {
        "h_x_independence": _check(ws[0], cfg.tol_h_spread, (0.0, ws[1]), heights=heights),
        "h_even": _check(max(we[0], sample_even), cfg.tol_h_even, (0.0, we[1]), pde_side=we[0], samples=sample_even),
        "h_pde_agreement": _check(wa[0], cfg.tol_h_agree, (0.0, wa[1])),
        "h_zero_at_z0": _check(pin_worst, cfg.tol_h_pin, (0.0, Y0), **h.extrapolation),
        "h_limit_at_s": _check(
            abs(h.extrapolation["s_extrapolated"] - h.extrapolation["s_limit"]), cfg.tol_h_pin, (0.0, dom.s)
        ),
        "h_interpolation": _check(interp, cfg.tol_h_agree, None, probes=int(probe.size)),
    }


def side_symmetry_check(sol, tol, n_rows=41, n_cols=9) -> Check:
    """Each nodal domain mirrors about the midpoint of its own x-extent.

    The edges of the right-hand domain come from two bisection solves of g,
    one per edge, independent of the trace.
    """
    dom = sol.domain
    eps, p = dom.epsilon, dom.perturbation
    ys = np.linspace(0.02, Y0 - 0.02, n_rows)

    def gfun(x):
        return eval_g(x, ys, eps, p).value

    left = bisect_vec(gfun, np.zeros_like(ys), np.full_like(ys, math.pi))
    right = bisect_vec(gfun, np.full_like(ys, math.pi), np.full_like(ys, 2 * math.pi - 1e-12))
    c = 0.5 * (left + right)
    worst, loc = 0.0, None
    umax = 1.0
    for sgn in (1.0, -1.0):
        t = np.linspace(0.05, 0.95, n_cols)
        for cc, lo, hi, y in zip(c, left, right, ys):
            x = lo + t * (hi - lo)
            a = sol.value(sgn * x, y, check=False)
            b = sol.value(sgn * (2 * cc - x), y, check=False)
            r = np.abs(a - b) / umax
            if r.max() > worst:
                worst, loc = float(r.max()), (sgn * float(x[np.argmax(r)]), float(y))
    # middle domain: mirror about the midpoint of its own extent
    mid_ext = np.stack([-left, left], 1)
    cm = mid_ext.mean(1)
    for cc, half, y in zip(cm, left, ys):
        x = np.linspace(-0.9, 0.9, n_cols) * half
        r = np.abs(sol.value(x, y, check=False) - sol.value(2 * cc - x, y, check=False))
        if r.max() > worst:
            worst, loc = float(r.max()), (float(x[np.argmax(r)]), float(y))
    return _check(
        worst, tol, loc, centre_deviation=float(np.max(np.abs(c - math.pi))), middle_centre=float(np.max(np.abs(cm)))
    )


def oracle_checks(cfg: ReportConfig) -> dict[str, Check]:
    """The ε = 0 pipeline against its closed forms."""
    tr0 = unperturbed_trace()
    dom0 = build_domain(tr0, 0.0, None)
    sol0 = SolutionU(dom0)
    h0 = build_h(sol0, tr0)
    n = cfg.oracle_grid
    ys = np.linspace(-(Y2 - 0.1), Y2 - 0.1, n)
    xs = np.linspace(-2 * math.pi, 2 * math.pi, n)
    U = sol0.grid(xs, ys)
    X, Y = np.meshgrid(xs, ys)
    ref = 0.5 * (np.cos(X) - np.cos(SQRT3 * Y)) ** 2
    err = np.where(np.isnan(U), 0.0, np.abs(U - ref))
    r, c = np.unravel_index(int(np.argmax(err)), err.shape)
    yh = np.linspace(-Y2, Y2, 4001)
    eh = np.abs(h0(yh) + 4 * np.sin(SQRT3 * yh) ** 2)
    k = int(np.argmax(eh))
    mu_err = float(np.max(np.abs(tr0.mu.coord - (2 * math.pi - SQRT3 * tr0.mu.param))))
    return {
        "oracle_u": _check(err[r, c], cfg.tol_oracle_u, (xs[c], ys[r]), grid=[n, n], mu_error=mu_err),
        "oracle_h": _check(eh[k], cfg.tol_oracle_h, (0.0, yh[k])),
    }


# --- suite -------------------------------------------------------------------------


def run_suite(
    sol: SolutionU,
    trace: TraceResult,
    report_cfg: ReportConfig | None = None,
    h: SourceH | None = None,
    provenance: str | None = None,
) -> VerificationReport:
    """Run every check in a fixed order and collect the report."""
    if sol is None or trace is None:
        raise ConfigError("verification needs the solution and the trace")
    cfg = report_cfg or ReportConfig()
    dom = sol.domain
    eps, p = dom.epsilon, dom.perturbation
    if p is None:
        raise ConfigError("verification needs the perturbation coefficients")
    if h is None:
        h = build_h(sol, trace)
    checks: dict[str, Check] = {}

    checks["helmholtz_v"] = helmholtz_check(eps, p, cfg.helmholtz_points, cfg.seed, cfg.tol_helmholtz)

    wc = verify_w_conditions(p)
    bad = [k for k, c in wc["checks"].items() if not c["pass"]]
    checks["w_conditions"] = Check(
        wc["pass"], float(len(bad)), None, 0.0, {"failed": bad, "checked": sorted(wc["checks"])}
    )

    res = constraint_residuals(p)
    worst = max(res, key=lambda k: abs(res[k]))
    checks["constraint_system"] = _check(abs(res[worst]), cfg.tol_system, None, largest=worst, residuals=res)

    cond = evaluate_epsilon(eps, p)
    wname = min(cond.margins, key=cond.margins.get)
    # a margin must be positive; report the shortfall below zero
    checks["epsilon_conditions"] = Check(
        cond.passed, max(0.0, -cond.margins[wname]), None, 0.0, {"weakest": wname, "margin": cond.margins[wname]}
    )

    checks.update(mu_checks(sol, trace, cfg.tol_mu_z0))
    checks["equal_angle_z0"] = equal_angle_check(eps, p, cfg.ray_radius, cfg.ray_samples, cfg.tol_angle_deg)

    nn, umax = nonnegativity_check(sol, cfg.nonneg_grid, cfg.tol_nonneg)
    checks["u_nonnegative"] = nn
    checks.update(boundary_checks(sol, cfg.boundary_points, umax, cfg.tol_dirichlet, cfg.tol_neumann, cfg.seed))
    checks["pde_residual"] = pde_check(sol, h, cfg.pde_points, cfg.seed, cfg.tol_pde)
    checks["zero_set"] = zero_set_check(sol, trace, cfg.zero_set_grid, cfg.zero_set_distance, cfg.tol_zero_set)
    checks.update(topology_checks(sol, cfg.topology_grid))
    checks["nodal_domain_symmetry"] = side_symmetry_check(sol, cfg.tol_symmetry)
    checks.update(h_checks(sol, trace, h, cfg))
    checks.update(oracle_checks(cfg))
    return VerificationReport(checks, provenance)


# --- figures -----------------------------------------------------------------------


def _mpl():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "nodalcx"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def _nodal_lines(ax, trace, color="k"):
    x, y = trace.mu.xy()
    xb = np.concatenate([x[::-1], x])
    yb = np.concatenate([-y[::-1], y])
    ax.plot(xb, yb, color=color, lw=1.2)
    ax.plot(-xb, yb, color=color, lw=1.2)
    cx, cy = trace.interior.xy()
    ax.plot(cx, cy, color=color, lw=1.2)
    ax.plot(-cx, cy, color=color, lw=1.2)


def _segment_straightness(paths, lines) -> float:
    """Largest distance from a contour vertex to the nearest of the given lines
    ``a x + b y + c = 0`` (unit normals)."""
    worst = 0.0
    L = np.asarray(lines)
    for v in paths:
        d = np.abs(v[:, :1] * L[:, 0] + v[:, 1:2] * L[:, 1] + L[:, 2])
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def compare_figures(sol: SolutionU, trace: TraceResult, out_dir, n: int = 401) -> dict:
    """Render the nodal set of u, the sign chart of v and the ε = 0 lines of w.

    Returns the written paths and the counts read off each figure's grid.
    """
    import pathlib

    plt = _mpl()
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dom = sol.domain
    x0, x1, y0, y1 = dom.bounding_box()
    paths = {}

    fig, ax = plt.subplots(figsize=(6, 4))
    _nodal_lines(ax, trace)
    for xv in (-math.pi, 0.0, math.pi):
        ax.axvline(xv, color="0.4", ls="--", lw=0.8)
    ax.axhline(0.0, color="0.4", ls="--", lw=0.8)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title("nodal set of u")
    paths["u_nodal"] = out / "u_nodal.svg"
    _save(fig, paths["u_nodal"])
    plt.close(fig)

    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    X, Y = np.meshgrid(xs, ys)
    inside = _inside_rows(dom, xs, ys)
    sv = np.where(inside, np.sign(eval_v(X, Y, dom.epsilon, dom.perturbation).value), np.nan)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.imshow(
        sv, origin="lower", extent=(x0, x1, y0, y1), cmap="coolwarm", vmin=-1.5, vmax=1.5, interpolation="nearest"
    )
    _nodal_lines(ax, trace)
    for xv in (-math.pi, 0.0, math.pi):
        yv = np.linspace(-Y0, Y0, 2) if abs(xv) > 0 else np.array([y0, y1])
        ax.plot([xv, xv], yv, color="k", lw=1.2)
    ax.set_aspect("equal")
    ax.set_title("sign of v")
    paths["v_sign"] = out / "v_sign.svg"
    _save(fig, paths["v_sign"])
    plt.close(fig)

    xw = np.linspace(-2 * math.pi, 2 * math.pi, n)
    yw = np.linspace(-Y2, Y2, n)
    XW, YW = np.meshgrid(xw, yw)
    w = eval_w(XW, YW).value
    rh = np.abs(XW) + SQRT3 * np.abs(YW) <= 2 * math.pi
    fig, ax = plt.subplots(figsize=(6, 4))
    cs = ax.contour(xw, yw, np.where(rh, w, np.nan), levels=[0.0], colors="k", linewidths=1.2)
    ax.plot([-2 * math.pi, 0, 2 * math.pi, 0, -2 * math.pi], [0, Y2, 0, -Y2, 0], color="0.4", ls="--", lw=0.8)
    ax.set_aspect("equal")
    ax.set_title("nodal lines of w")
    paths["w_lines"] = out / "w_lines.svg"
    _save(fig, paths["w_lines"])
    plt.close(fig)

    verts = [seg for seg in cs.allsegs[0] if len(seg) > 1]
    h = 0.5 * SQRT3
    lines = [(1.0, 0.0, -k * math.pi) for k in (-2, -1, 0, 1, 2)]
    for k in (-2, -1, 0, 1, 2):
        # x ∓ √3 y = 2πk, normalised
        lines.append((0.5, -h, -math.pi * k))
        lines.append((0.5, h, -math.pi * k))
    straight = _segment_straightness(verts, lines)
    topo = nodal_topology(sol, n)
    return {
        "paths": {k: str(v) for k, v in paths.items()},
        "interior_curves_u": topo["curves_u"],
        "v_sign_regions": topo["regions_v"],
        "w_line_deviation": straight,
        "w_grid_step": float(xw[1] - xw[0]),
    }
