"""Closed-form jets of the Helmholtz solutions used by the construction.

Every field here solves (or is the x-antiderivative / sin x factor of a
solution of) ``Δv + 4v = 0``:

* ``w(x, y)   = (cos(√3 y) - cos x) sin x``
* ``ψ(x, y)   = Σ_j (d_j / k_j) sin(k_j x) cosh(ν_j y)``,  ``ν_j = sqrt(k_j² - 4)``
* ``v         = w + ε ψ``
* ``g         = v / sin x`` (analytic, via Chebyshev polynomials of the second kind)
* ``U``       the x-antiderivative of ``v``

All partial derivatives are hand-derived.  The ψ sums are accumulated in
``np.longdouble``: the coefficients are chosen so that terms of size ~1e12
cancel to O(1) near ``y = 2π/√3``, and a float64 accumulation would leave
~1e-4 of noise there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import mpmath
import numpy as np

from .errors import FieldOverflowError

if TYPE_CHECKING:
    from .coeffs import Perturbation

SQRT3 = math.sqrt(3.0)
Y0 = math.pi / SQRT3
Y2 = 2.0 * math.pi / SQRT3
Z0 = (math.pi, Y0)
Z1 = (0.0, 0.0)
Z2 = (0.0, Y2)

COSH_ARG_CAP = 700.0

_LD = np.longdouble


class DerivativeJet(NamedTuple):
    """Value and partial derivatives up to second order."""

    value: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray

    def helmholtz_defect(self):
        return self.dxx + self.dyy + 4.0 * self.value

    def magnitude(self):
        return np.abs(self.dxx) + np.abs(self.dyy) + 4.0 * np.abs(self.value)

    def gradient_norm(self):
        return np.hypot(self.dx, self.dy)

    def hessian(self) -> np.ndarray:
        """2x2 Hessian (scalar jets only)."""
        return np.array([[float(self.dxx), float(self.dxy)], [float(self.dxy), float(self.dyy)]])

    def combine(self, other: "DerivativeJet", scale: float) -> "DerivativeJet":
        """Return ``self + scale * other`` entrywise."""
        return DerivativeJet(*(a + scale * b for a, b in zip(self, other)))

    def as_float(self) -> "DerivativeJet":
        return DerivativeJet(*(np.asarray(a, dtype=float)[()] for a in self))


def _xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.broadcast_arrays(x, y)


def _check_cap(nu_max: float, y) -> None:
    ymax = float(np.max(np.abs(y))) if np.size(y) else 0.0
    if nu_max * ymax > COSH_ARG_CAP:
        raise FieldOverflowError(
            f"cosh argument {nu_max * ymax:.1f} exceeds cap {COSH_ARG_CAP} (|y|={ymax:.4g})"
        )


def w_tilde(x, y):
    """``cos(√3 y) - cos x`` in product form, accurate near every zero line."""
    x, y = _xy(x, y)
    t = SQRT3 * y
    return -2.0 * np.sin(0.5 * (x + t)) * np.sin(0.5 * (t - x))


def eval_w(x, y) -> DerivativeJet:
    """Jet of ``w = (cos √3y - cos x) sin x``."""
    x, y = _xy(x, y)
    sx, cx = np.sin(x), np.cos(x)
    s3, c3 = np.sin(SQRT3 * y), np.cos(SQRT3 * y)
    wt = w_tilde(x, y)
    return DerivativeJet(
        value=wt * sx,
        dx=sx * sx + wt * cx,
        dy=-SQRT3 * s3 * sx,
        dxx=3.0 * sx * cx - wt * sx,
        dxy=-SQRT3 * s3 * cx,
        dyy=-3.0 * c3 * sx,
    )


def _coeff_arrays(p: "Perturbation"):
    ws = p.waveset
    k = np.array(ws.k, dtype=_LD)
    nu = np.sqrt(k * k - 4)
    d = p.d_ld
    return k, nu, d


def eval_psi(x, y, p: "Perturbation") -> DerivativeJet:
    """Jet of the perturbation ``ψ = Σ (d_j/k_j) sin(k_j x) cosh(ν_j y)``."""
    x, y = _xy(x, y)
    k, nu, d = _coeff_arrays(p)
    _check_cap(float(nu.max()), y)
    xl, yl = x.astype(_LD), y.astype(_LD)
    acc = [np.zeros(x.shape, dtype=_LD) for _ in range(6)]
    for kj, nj, dj in zip(k, nu, d):
        s, c = np.sin(kj * xl), np.cos(kj * xl)
        ch, sh = np.cosh(nj * yl), np.sinh(nj * yl)
        cj = dj / kj
        acc[0] += cj * s * ch
        acc[1] += dj * c * ch
        acc[2] += cj * nj * s * sh
        acc[3] -= dj * kj * s * ch
        acc[4] += dj * nj * c * sh
        acc[5] += cj * nj * nj * s * ch
    return DerivativeJet(*(a.astype(float) for a in acc))


def eval_v(x, y, eps: float, p: "Perturbation | None") -> DerivativeJet:
    """Jet of ``v = w + ε ψ``."""
    jw = eval_w(x, y)
    if eps == 0.0:
        return jw
    return jw.combine(eval_psi(x, y, p), eps)


def chebyshev_u_sums(c, weights: dict[int, np.ndarray]):
    """Weighted sums of ``U_m(c)``, ``U_m'(c)``, ``U_m''(c)``.

    ``weights`` maps a degree ``m`` to an array broadcastable against ``c``.
    Uses the three-term recurrence ``U_{m+1} = 2c U_m - U_{m-1}`` and its
    first two derivatives, so no division by ``sin x`` ever occurs.
    """
    c = np.asarray(c)
    mmax = max(weights)
    u_prev, u = np.ones_like(c), 2 * c
    du_prev, du = np.zeros_like(c), 2 * np.ones_like(c)
    ddu_prev, ddu = np.zeros_like(c), np.zeros_like(c)
    s0 = s1 = s2 = 0
    for m in range(mmax + 1):
        if m == 0:
            cur = (np.ones_like(c), np.zeros_like(c), np.zeros_like(c))
        elif m == 1:
            cur = (u, du, ddu)
        else:
            u_next = 2 * c * u - u_prev
            du_next = 2 * u + 2 * c * du - du_prev
            ddu_next = 4 * du + 2 * c * ddu - ddu_prev
            u_prev, u = u, u_next
            du_prev, du = du, du_next
            ddu_prev, ddu = ddu, ddu_next
            cur = (u, du, ddu)
        if m in weights:
            wgt = weights[m]
            s0 = s0 + wgt * cur[0]
            s1 = s1 + wgt * cur[1]
            s2 = s2 + wgt * cur[2]
    return s0, s1, s2


def chebyshev_u(m: int, c):
    """``U_m(c)`` by recurrence."""
    return chebyshev_u_sums(c, {m: 1})[0]


def _psit_sums(x, y, p: "Perturbation"):
    """Sums needed for the jet of ``ψ / sin x`` expressed through ``c = cos x``.

    One recurrence pass serves three weight families stacked on a leading
    axis: ``d/k cosh``, ``d/k ν sinh`` and ``d/k ν² cosh``.
    """
    k, nu, d = _coeff_arrays(p)
    _check_cap(float(nu.max()), y)
    c = np.cos(x.astype(_LD))
    yl = y.astype(_LD)
    weights = {}
    for j in range(len(k)):
        ch = np.cosh(nu[j] * yl)
        sh = np.sinh(nu[j] * yl)
        cj = d[j] / k[j]
        weights[int(k[j]) - 1] = np.stack([cj * ch, (cj * nu[j]) * sh, (cj * nu[j] ** 2) * ch])
    s0, s1, s2 = chebyshev_u_sums(c, weights)
    return {"ch": (s0[0], s1[0], s2[0]), "nsh": (s0[1], s1[1], s2[1]), "n2ch": (s0[2], s1[2], s2[2])}


def _psi_tilde_parts(x, y, p: "Perturbation"):
    sm = _psit_sums(x, y, p)
    sx, cx = np.sin(x), np.cos(x)
    (S0, S1, S2) = (a.astype(float) for a in sm["ch"])
    (T0, T1, _) = (a.astype(float) for a in sm["nsh"])
    V0 = sm["n2ch"][0].astype(float)
    jet = DerivativeJet(
        value=S0,
        dx=-sx * S1,
        dy=T0,
        dxx=sx * sx * S2 - cx * S1,
        dxy=-sx * T1,
        dyy=V0,
    )
    return jet, S1


def eval_psi_tilde(x, y, p: "Perturbation") -> DerivativeJet:
    """Jet of ``ψ̃ = ψ / sin x = Σ (d_j/k_j) U_{k_j-1}(cos x) cosh(ν_j y)``."""
    x, y = _xy(x, y)
    return _psi_tilde_parts(x, y, p)[0]


def eval_w_tilde(x, y) -> DerivativeJet:
    x, y = _xy(x, y)
    return DerivativeJet(
        value=w_tilde(x, y),
        dx=np.sin(x),
        dy=-SQRT3 * np.sin(SQRT3 * y),
        dxx=np.cos(x),
        dxy=np.zeros_like(x),
        dyy=-3.0 * np.cos(SQRT3 * y),
    )


def eval_g(x, y, eps: float, p: "Perturbation | None") -> DerivativeJet:
    """Jet of the factored field ``g = v / sin x``, analytic across ``x = kπ``."""
    jw = eval_w_tilde(x, y)
    if eps == 0.0:
        return jw
    return jw.combine(eval_psi_tilde(x, y, p), eps)


def g_c(x, y, eps: float, p: "Perturbation | None"):
    """``∂g/∂c`` with ``c = cos x``; equals ``-g_x / sin x`` and is ≈ -1 near the nodal lines."""
    return eval_g_gc(x, y, eps, p)[1]


def eval_g_gc(x, y, eps: float, p: "Perturbation | None"):
    """``(jet of g, ∂g/∂c)`` from a single pass over the Chebyshev sums."""
    x, y = _xy(x, y)
    jw = eval_w_tilde(x, y)
    if eps == 0.0:
        return jw, -np.ones_like(x)
    jp, s1 = _psi_tilde_parts(x, y, p)
    return jw.combine(jp, eps), -1.0 + eps * s1


def eval_U(x, y, eps: float, p: "Perturbation | None") -> DerivativeJet:
    """Jet of ``U = -cos(√3y) cos x - sin²x / 2 - ε Σ (d_j/k_j²) cos(k_j x) cosh(ν_j y)``.

    ``∂U/∂x = v`` identically, so ``dx``, ``dxx``, ``dxy`` are taken from the jet of ``v``.
    """
    x, y = _xy(x, y)
    sx, cx = np.sin(x), np.cos(x)
    s3, c3 = np.sin(SQRT3 * y), np.cos(SQRT3 * y)
    val = -c3 * cx - 0.5 * sx * sx
    uy = SQRT3 * s3 * cx
    uyy = 3.0 * c3 * cx
    jv = eval_v(x, y, eps, p)
    if eps != 0.0:
        k, nu, d = _coeff_arrays(p)
        _check_cap(float(nu.max()), y)
        xl, yl = x.astype(_LD), y.astype(_LD)
        a0 = np.zeros(x.shape, dtype=_LD)
        a1 = np.zeros(x.shape, dtype=_LD)
        a2 = np.zeros(x.shape, dtype=_LD)
        for kj, nj, dj in zip(k, nu, d):
            c = np.cos(kj * xl) * (dj / (kj * kj))
            ch = np.cosh(nj * yl)
            a0 += c * ch
            a1 += c * nj * np.sinh(nj * yl)
            a2 += c * nj * nj * ch
        val = val - eps * a0.astype(float)
        uy = uy - eps * a1.astype(float)
        uyy = uyy - eps * a2.astype(float)
    return DerivativeJet(value=val, dx=jv.value, dy=uy, dxx=jv.dx, dxy=jv.dy, dyy=uyy)


def eval_U_grid(xs, ys, eps: float, p: "Perturbation | None") -> np.ndarray:
    """Values of U on the tensor grid ``ys x xs`` (shape ``(len(ys), len(xs))``).

    Every term of U is a product of a function of x and a function of y, so
    the grid costs one small matrix product instead of a pointwise sweep.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    val = -np.outer(np.cos(SQRT3 * ys), np.cos(xs)) - 0.5 * np.sin(xs)[None, :] ** 2
    if eps != 0.0:
        k, nu, d = _coeff_arrays(p)
        _check_cap(float(nu.max()), ys)
        cx = np.cos(np.outer(k, xs.astype(_LD))) * (d / (k * k))[:, None]
        chy = np.cosh(np.outer(nu, ys.astype(_LD)))
        val = val - eps * (chy.T @ cx).astype(float)
    return val


_EVALUATORS = {
    "W": lambda h, x, y: eval_w(x, y),
    "PSI": lambda h, x, y: eval_psi(x, y, h.perturbation),
    "V": lambda h, x, y: eval_v(x, y, h.epsilon, h.perturbation),
    "G": lambda h, x, y: eval_g(x, y, h.epsilon, h.perturbation),
    "U": lambda h, x, y: eval_U(x, y, h.epsilon, h.perturbation),
}


@dataclass(frozen=True)
class FieldHandle:
    """Immutable evaluator for one of the five field kinds."""

    kind: str
    epsilon: float = 0.0
    perturbation: "Perturbation | None" = None

    def __post_init__(self):
        if self.kind not in _EVALUATORS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.kind == "PSI" and self.perturbation is None:
            raise ValueError("PSI needs a perturbation")
        if self.epsilon > 0 and self.perturbation is None:
            raise ValueError("epsilon > 0 needs a perturbation")

    def __call__(self, x, y) -> DerivativeJet:
        return _EVALUATORS[self.kind](self, x, y)


# --- extended precision (verification only) --------------------------------


def eval_psi_mp(x, y, p: "Perturbation", dps: int = 60) -> DerivativeJet:
    """Scalar jet of ψ in mpmath, using the full-precision coefficients.

    ``x`` and ``y`` may be mpmath numbers (e.g. ``mpmath.pi / mpmath.sqrt(3)``)
    so that the constraint points are represented beyond double precision.
    """
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        y = mpmath.mpf(y)
        acc = [mpmath.mpf(0)] * 6
        for kj, dj in zip(p.waveset.k, p.d_exact):
            kj = mpmath.mpf(kj)
            dj = mpmath.mpf(dj)
            nj = mpmath.sqrt(kj * kj - 4)
            s, c = mpmath.sin(kj * x), mpmath.cos(kj * x)
            ch, sh = mpmath.cosh(nj * y), mpmath.sinh(nj * y)
            cj = dj / kj
            acc[0] += cj * s * ch
            acc[1] += dj * c * ch
            acc[2] += cj * nj * s * sh
            acc[3] -= dj * kj * s * ch
            acc[4] += dj * nj * c * sh
            acc[5] += cj * nj * nj * s * ch
        return DerivativeJet(*acc)


def mp_points(dps: int = 60) -> dict[str, tuple]:
    """The special points z0, z1, z2 at extended precision."""
    with mpmath.workdps(dps):
        r3 = mpmath.sqrt(3)
        return {
            "z0": (+mpmath.pi, mpmath.pi / r3),
            "z1": (mpmath.mpf(0), mpmath.mpf(0)),
            "z2": (mpmath.mpf(0), 2 * mpmath.pi / r3),
        }
