"""Wavenumber selection and the five-constraint solve for the perturbation ψ.

The unknowns are ``d_j = k_j c_{k_j}``, so the system matrix is literally

    (1, ..., 1)
    cosh(π ν_j / √3)
    ν_j sinh(π ν_j / √3)
    cosh(2π ν_j / √3)
    ν_j sinh(2π ν_j / √3)

with right-hand side ``(-1, 0, 0, 1, 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import mpmath
import numpy as np

from .errors import ConditioningError, FieldOverflowError, WavesetError
from .field import COSH_ARG_CAP, SQRT3, Y0, Y2, eval_psi, eval_psi_mp, mp_points
from .linalg import equilibrate, equilibrated_det, full_pivot_solve

MINOR_THRESHOLD = 1e-10
RESIDUAL_TOL = 1e-9
RHS = (-1.0, 0.0, 0.0, 1.0, 1.0)
CONSTRAINTS = (
    ("psi_x(z1)", "z1", "dx", -1),
    ("psi_x(z0)", "z0", "dx", 0),
    ("psi_xy(z0)", "z0", "dxy", 0),
    ("psi_x(z2)", "z2", "dx", 1),
    ("psi_xy(z2)", "z2", "dxy", 1),
)
# Hold automatically by the form of ψ (sin(kπ) = 0 for every term).
AUTOMATIC = (
    ("psi(z0)", "z0", "value"),
    ("psi_y(z0)", "z0", "dy"),
    ("psi_xx(z0)", "z0", "dxx"),
    ("psi_yy(z0)", "z0", "dyy"),
)
EXACT_DPS = 60
_K_CAP = int(math.floor(math.sqrt((COSH_ARG_CAP * SQRT3 / (2 * math.pi)) ** 2 + 4)))


@dataclass(frozen=True)
class WaveSet:
    k: tuple[int, ...]

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        object.__setattr__(self, "k", k)
        if len(k) != 5:
            raise WavesetError(f"need five wavenumbers, got {len(k)}")
        if any(v % 2 or v <= 4 for v in k):
            raise WavesetError(f"wavenumbers must be even and > 4: {k}")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise WavesetError(f"wavenumbers must increase strictly: {k}")

    @property
    def nu(self) -> tuple[float, ...]:
        return tuple(math.sqrt(v * v - 4) for v in self.k)

    def minor_determinants(self) -> list[float]:
        m = assemble_matrix(self).unscaled
        return [equilibrated_det(m[:j, :j]) for j in range(1, 6)]


@dataclass(frozen=True)
class ConstraintMatrix:
    entries: np.ndarray
    row_scales: np.ndarray
    col_scales: np.ndarray

    @property
    def unscaled(self) -> np.ndarray:
        return self.entries * self.row_scales[:, None] * self.col_scales[None, :]


def _rows(nu: np.ndarray) -> np.ndarray:
    a = math.pi / SQRT3
    return np.array(
        [
            np.ones_like(nu),
            np.cosh(a * nu),
            nu * np.sinh(a * nu),
            np.cosh(2 * a * nu),
            nu * np.sinh(2 * a * nu),
        ]
    )


def _check_matrix_cap(nu_max: float) -> None:
    if 2 * math.pi * nu_max / SQRT3 > COSH_ARG_CAP:
        raise FieldOverflowError(f"2πν/√3 = {2 * math.pi * nu_max / SQRT3:.1f} exceeds {COSH_ARG_CAP}")


def assemble_matrix(ws: WaveSet) -> ConstraintMatrix:
    nu = np.array(ws.nu)
    _check_matrix_cap(float(nu.max()))
    entries, rs, cs = equilibrate(_rows(nu))
    return ConstraintMatrix(entries=entries, row_scales=rs, col_scales=cs)


def _mp_matrix(ws: WaveSet, dps: int = EXACT_DPS):
    with mpmath.workdps(dps):
        a = mpmath.pi / mpmath.sqrt(3)
        cols = []
        for k in ws.k:
            nu = mpmath.sqrt(mpmath.mpf(k) ** 2 - 4)
            cols.append(
                [
                    mpmath.mpf(1),
                    mpmath.cosh(a * nu),
                    nu * mpmath.sinh(a * nu),
                    mpmath.cosh(2 * a * nu),
                    nu * mpmath.sinh(2 * a * nu),
                ]
            )
        return mpmath.matrix([[cols[j][i] for j in range(5)] for i in range(5)])


def select_waveset(start_k: int = 6, threshold: float = MINOR_THRESHOLD) -> WaveSet:
    """Greedy choice of ``k_1 < ... < k_5``.

    Each new even candidate is accepted once the equilibrated determinant of
    the corresponding leading principal minor exceeds ``threshold``.
    """
    if start_k % 2 or start_k <= 4:
        raise WavesetError(f"start_k must be even and > 4, got {start_k}")
    ks = [start_k]
    while len(ks) < 5:
        j = len(ks) + 1
        cand = ks[-1] + 2
        while True:
            if cand > _K_CAP:
                raise WavesetError(
                    f"minor {j} stayed below {threshold:g} for all even k <= {_K_CAP} (prefix {ks})"
                )
            nu = np.sqrt(np.array(ks + [cand], dtype=float) ** 2 - 4)
            if abs(equilibrated_det(_rows(nu)[:j, :j])) > threshold:
                break
            cand += 2
        ks.append(cand)
    return WaveSet(tuple(ks))


@dataclass(frozen=True)
class Perturbation:
    """Coefficients of ψ together with the constraint residuals.

    ``d_exact`` holds decimal strings at ~50 significant digits; ``d`` is
    their double rounding.  Residuals are evaluated with the exact
    coefficients in extended precision; ``float_residuals`` records what the
    long-double hot path reproduces.
    """

    waveset: WaveSet
    d: tuple[float, ...]
    d_exact: tuple[str, ...] = ()
    residuals: dict = field(default_factory=dict)
    float_residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.d_exact:
            object.__setattr__(self, "d_exact", tuple(repr(float(v)) for v in self.d))

    @cached_property
    def d_ld(self) -> np.ndarray:
        return np.array([np.longdouble(s) for s in self.d_exact], dtype=np.longdouble)

    @property
    def c(self) -> tuple[float, ...]:
        return tuple(dj / kj for dj, kj in zip(self.d, self.waveset.k))

    @property
    def max_residual(self) -> float:
        return max(abs(v) for v in self.residuals.values()) if self.residuals else math.inf

    def to_dict(self) -> dict:
        return {
            "k": list(self.waveset.k),
            "d": [format(v, ".17g") for v in self.d],
            "d_exact": list(self.d_exact),
            "residuals": {k: format(v, ".17g") for k, v in self.residuals.items()},
            "float_residuals": {k: format(v, ".17g") for k, v in self.float_residuals.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Perturbation":
        return cls(
            waveset=WaveSet(tuple(data["k"])),
            d=tuple(float(v) for v in data["d"]),
            d_exact=tuple(data["d_exact"]),
            residuals={k: float(v) for k, v in data.get("residuals", {}).items()},
            float_residuals={k: float(v) for k, v in data.get("float_residuals", {}).items()},
        )


def constraint_residuals(p: Perturbation, dps: int = EXACT_DPS) -> dict[str, float]:
    """All (systc) residuals plus the automatic z0 identities, in extended precision."""
    pts = mp_points(dps)
    jets = {name: eval_psi_mp(*pts[name], p, dps=dps) for name in ("z0", "z1", "z2")}
    out = {}
    for name, pt, comp, target in CONSTRAINTS:
        out[name] = float(getattr(jets[pt], comp) - target)
    for name, pt, comp in AUTOMATIC:
        out[name] = float(getattr(jets[pt], comp))
    return out


def float_constraint_residuals(p: Perturbation) -> dict[str, float]:
    pts = {"z0": (math.pi, Y0), "z1": (0.0, 0.0), "z2": (0.0, Y2)}
    out = {}
    for name, pt, comp, target in CONSTRAINTS:
        out[name] = float(getattr(eval_psi(*pts[pt], p), comp)) - target
    for name, pt, comp in AUTOMATIC:
        out[name] = float(getattr(eval_psi(*pts[pt], p), comp))
    return out


def solve_unrefined(ws: WaveSet, equilibrated: bool = True) -> np.ndarray:
    """Double-precision solve, with or without equilibration."""
    m = assemble_matrix(ws)
    rhs = np.array(RHS)
    if not equilibrated:
        return full_pivot_solve(m.unscaled, rhs)
    y = full_pivot_solve(m.entries, rhs / m.row_scales)
    return y / m.col_scales


def solve_perturbation(ws: WaveSet, max_refine: int = 8) -> Perturbation:
    """Solve the constraint system and verify it by direct evaluation of ψ.

    The double-precision full-pivot solve on the equilibrated matrix is
    followed by iterative refinement whose residuals are formed at
    ``EXACT_DPS`` digits; the constraint rows sum terms of size ~1e12 that
    cancel to O(1), which no double-precision coefficient vector can honour
    to better than ~1e-4.
    """
    m = assemble_matrix(ws)
    d = solve_unrefined(ws)
    with mpmath.workdps(EXACT_DPS):
        mm = _mp_matrix(ws)
        rhs = mpmath.matrix(list(RHS))
        dm = mpmath.matrix([mpmath.mpf(float(v)) for v in d])
        for _ in range(max_refine):
            r = rhs - mm * dm
            rf = np.array([float(r[i]) for i in range(5)])
            corr = full_pivot_solve(m.entries, rf / m.row_scales) / m.col_scales
            for i in range(5):
                dm[i] += mpmath.mpf(float(corr[i]))
            rel = max(abs(corr[i] / float(dm[i])) for i in range(5))
            if rel < 1e-45:
                break
        d_exact = tuple(mpmath.nstr(dm[i], 50, strip_zeros=False) for i in range(5))
    p = Perturbation(waveset=ws, d=tuple(float(mpmath.mpf(s)) for s in d_exact), d_exact=d_exact)
    res = constraint_residuals(p)
    p = Perturbation(
        waveset=ws, d=p.d, d_exact=d_exact, residuals=res, float_residuals=float_constraint_residuals(p)
    )
    if p.max_residual > RESIDUAL_TOL:
        worst = max(res, key=lambda k: abs(res[k]))
        raise ConditioningError(
            f"constraint residual {res[worst]:.3g} at {worst} exceeds {RESIDUAL_TOL:g}; re-select the waveset"
        )
    return p


def verify_w_conditions(p: Perturbation, n: int = 41, seed: int = 0) -> dict:
    """Check (W2)-(W5) on sample grids.

    Returns ``{"pass": bool, "checks": {name: {"pass", "worst", "tol"}}}``.
    Symmetry tolerances are relative to the size of the individual terms,
    which reach ~1e12 near the top of the fundamental cell.
    """
    rng = np.random.default_rng(seed)
    ys = np.concatenate([np.linspace(-Y2, Y2, n), rng.uniform(-Y2, Y2, n)])
    ts = rng.uniform(0.0, math.pi, ys.size)
    scale = _term_scale(p, ys)
    checks = {}

    def add(name, worst, tol, ok=None):
        ok = worst <= tol if ok is None else ok
        checks[name] = {"pass": bool(ok), "worst": float(worst), "tol": float(tol)}

    w2 = 0.0
    odd = 0.0
    for kk in (-1, 0, 1):
        xk = kk * math.pi
        w2 = max(w2, float(np.max(np.abs(eval_psi(np.full_like(ys, xk), ys, p).value) / scale)))
        a = eval_psi(xk + ts, ys, p).value
        b = eval_psi(xk - ts, ys, p).value
        odd = max(odd, float(np.max(np.abs(a + b) / scale)))
    add("W2_vanish_on_kpi", w2, 1e-12)
    add("W2_odd_about_kpi", odd, 1e-12)
    xs = rng.uniform(-2 * math.pi, 2 * math.pi, ys.size)
    ev = np.abs(eval_psi(xs, ys, p).value - eval_psi(xs, -ys, p).value) / scale
    add("W3_even_in_y", float(ev.max()), 1e-12)
    for name in ("psi_x(z0)", "psi_xy(z0)", "psi(z0)", "psi_y(z0)", "psi_xx(z0)", "psi_yy(z0)"):
        add(f"W4_{name}", abs(p.residuals[name]), RESIDUAL_TOL)
    j1 = p.residuals["psi_x(z1)"] - 1.0
    j2 = p.residuals["psi_x(z2)"] + 1.0
    j3 = p.residuals["psi_xy(z2)"] + 1.0
    add("W5_psi_x(z1)<0", -j1, 0.0, ok=j1 < 0)
    add("W5_psi_x(z2)>0", j2, 0.0, ok=j2 > 0)
    add("W5_psi_xy(z2)>0", j3, 0.0, ok=j3 > 0)
    return {"pass": all(c["pass"] for c in checks.values()), "checks": checks}


def _term_scale(p: Perturbation, y) -> np.ndarray:
    nu = np.array(p.waveset.nu)
    d = np.abs(np.array(p.d))
    return 1.0 + np.sum(d[:, None] * np.cosh(np.outer(nu, np.abs(np.asarray(y)))), axis=0)
