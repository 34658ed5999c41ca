"""Acceptance criteria, one test each.  Every test prints a single
``criterion N PASS|FAIL: ...`` line before asserting."""
from __future__ import annotations

import json
import math
import time

import numpy as np
import pytest

from nodalcx.cli import EXIT_OK, main
from nodalcx.coeffs import constraint_residuals
from nodalcx.field import SQRT3, Y0, Y2, eval_v
from nodalcx.nodal import find_s, trace_mu
from nodalcx.solution import residual_h
from nodalcx.verify import equal_angle_check, nodal_topology


@pytest.fixture
def say(capsys):
    def emit(n, ok, text):
        with capsys.disabled():
            print(f"\ncriterion {n} {'PASS' if ok else 'FAIL'}: {text}", flush=True)

    return emit


def test_criterion_1_helmholtz_identity(pert, eps, say):
    rng = np.random.default_rng(2024)
    n = 1_000_000
    x = rng.uniform(-2 * math.pi, 2 * math.pi, n)
    y = rng.uniform(-Y2, Y2, n)
    t0 = time.perf_counter()
    j = eval_v(x, y, eps, pert)
    worst = float(np.max(np.abs(j.helmholtz_defect()) / (1 + np.abs(j.value))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-11 and dt < 10.0
    say(1, ok, f"max |Δv+4v|/(1+|v|) = {worst:.3g} (tol 1e-11) over {n} points in {dt:.2f} s (limit 10 s)")
    assert worst <= 1e-11
    assert dt < 10.0


def test_criterion_2_constraint_system(pert, say):
    res = constraint_residuals(pert)
    system = ("psi_x(z1)", "psi_x(z0)", "psi_xy(z0)", "psi_x(z2)", "psi_xy(z2)")
    # Dψ(z0) = (ψ_x, ψ_y), D²ψ(z0) = (ψ_xx, ψ_xy, ψ_yy)
    at_z0 = ("psi_x(z0)", "psi_y(z0)", "psi_xx(z0)", "psi_xy(z0)", "psi_yy(z0)")
    w_sys = max(abs(res[k]) for k in system)
    w_z0 = max(abs(res[k]) for k in at_z0)
    ok = w_sys <= 1e-9 and w_z0 <= 1e-9
    say(2, ok, f"k = {pert.waveset.k}; max system residual {w_sys:.3g}, max Dψ/D²ψ(z0) entry {w_z0:.3g} (tol 1e-9)")
    assert w_sys <= 1e-9
    assert w_z0 <= 1e-9


def test_criterion_3_unperturbed_limit(pert, sol0, h0, say):
    e = math.ldexp(1.0, -20)
    s = find_s(e, pert)
    mu = trace_mu(e, pert, s=s, strict=False)
    sel = mu.param <= Y2 - 0.05
    covered = mu.param[sel].max() >= Y2 - 0.05 - 1e-2
    dev = float(np.max(np.abs(mu.coord[sel] - (2 * math.pi - SQRT3 * mu.param[sel]))))

    ys = np.linspace(-(Y2 - 0.1), Y2 - 0.1, 401)
    xs = np.linspace(-2 * math.pi, 2 * math.pi, 401)
    X, Y = np.meshgrid(xs, ys)
    U = sol0.grid(xs, ys)
    ref = 0.5 * (np.cos(X) - np.cos(SQRT3 * Y)) ** 2
    u_err = float(np.nanmax(np.abs(U - ref)))
    yh = np.linspace(-Y2, Y2, 4001)
    h_err = float(np.max(np.abs(h0(yh) + 4 * np.sin(SQRT3 * yh) ** 2)))

    ok = covered and dev <= 1e-3 and u_err <= 1e-10 and h_err <= 1e-8
    say(
        3,
        ok,
        f"ε=2^-20 max|μ-(2π-√3y)| = {dev:.3g} (tol 1e-3); ε=0 max|u-(cos x-cos√3y)²/2| = {u_err:.3g} "
        f"(tol 1e-10), max|h+4sin²√3y| = {h_err:.3g} (tol 1e-8)",
    )
    assert covered
    assert u_err <= 1e-10
    assert h_err <= 1e-8
    assert dev <= 1e-3


def test_criterion_4_structure(pert, eps, tr, dom, sol, say):
    s = tr.s
    s_ok = Y0 < s < Y2
    mu_z0 = float(dom.mu_at(Y0))
    mu_z0_trace = float(tr.mu.coord[tr.mu.param == Y0][0])
    z0_err = max(abs(mu_z0 - math.pi), abs(mu_z0_trace - math.pi))
    steps = np.diff(tr.mu.coord)
    decreasing = bool(np.all(steps < 0))
    topo = nodal_topology(sol, 1001)
    rays = equal_angle_check(eps, pert, 1e-3, 7200, 1.0)
    ok = s_ok and z0_err <= 1e-9 and decreasing and topo["curves_u"] == 2 and rays.passed
    say(
        4,
        ok,
        f"s = {s:.15g} in (π/√3, 2π/√3): {s_ok}; |μ(π/√3)-π| = {z0_err:.3g}; μ decreasing: {decreasing} "
        f"(max step {steps.max():.3g}); interior curves at 1001²: {topo['curves_u']}; "
        f"ray spacing deviation {rays.worst_residual:.3g}° over {rays.details.get('rays')} rays",
    )
    assert s_ok
    assert z0_err <= 1e-9
    assert decreasing
    assert topo["curves_u"] == 2
    assert rays.passed


def test_criterion_5_pde_and_boundary(tmp_path, say):
    t0 = time.perf_counter()
    code = main(["run", "--out", str(tmp_path)])
    dt = time.perf_counter() - t0
    rep = json.loads((tmp_path / "report.json").read_text())["checks"]
    parts = {k: rep[k] for k in ("pde_residual", "u_nonnegative", "dirichlet", "neumann")}
    ok = code == EXIT_OK and dt <= 60.0 and all(c["pass"] for c in parts.values())
    pieces = ", ".join(f"{k} {float(c['worst_residual']):.3g} (tol {float(c['tolerance']):.3g})" for k, c in parts.items())
    say(5, ok, f"{pieces}; samples: pde {rep['pde_residual']['details']['samples']}, "
        f"boundary {rep['dirichlet']['details']['samples']}; pipeline exit {code} in {dt:.1f} s (limit 60 s)")
    assert code == EXIT_OK
    assert all(c["pass"] for c in parts.values())
    assert int(rep["pde_residual"]["details"]["samples"]) >= 100_000
    assert int(rep["dirichlet"]["details"]["samples"]) >= 10_000
    assert dt <= 60.0


def test_criterion_6_source_consistency(sol, dom, h, say):
    heights = np.concatenate([np.linspace(0.05, Y0 - 0.02, 12), np.linspace(Y0 + 0.02, dom.s - 0.02, 12)])
    spread = 0.0
    for y in heights:
        m = float(dom.mu_at(y))
        sp, _ = residual_h(sol, float(y), np.linspace(-0.9, 0.9, 7) * m)
        spread = max(spread, sp)
    yy = np.linspace(0.0, dom.s, 2001)
    even_spline = float(np.max(np.abs(h(yy) - h(-yy))))
    x = 0.5 * dom.mu_at(yy[:-1])
    up = -sol.jet(x, yy[:-1]).helmholtz_defect()
    dn = -sol.jet(x, -yy[:-1]).helmholtz_defect()
    even_pde = float(np.max(np.abs(up - dn)))
    even = max(even_spline, even_pde)
    pin = max(abs(h.extrapolation["y0_left"]), abs(h.extrapolation["y0_right"]))
    ok = spread <= 1e-6 and even <= 1e-12 and pin <= 1e-6
    say(6, ok, f"x-dispersion {spread:.3g} over {heights.size} heights (tol 1e-6); evenness {even:.3g} (tol 1e-12); "
        f"h(π/√3) extrapolations {pin:.3g} (tol 1e-6)")
    assert spread <= 1e-6
    assert even <= 1e-12
    assert pin <= 1e-6
