from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nodalcx.errors import ConfigError
from nodalcx.field import Y0
from nodalcx.solution import SolutionU, build_domain
from nodalcx.verify import (
    ReportConfig,
    _check,
    compare_figures,
    equal_angle_rays,
    helmholtz_check,
    nodal_topology,
    pde_check,
    run_suite,
    topology_grid,
)


@pytest.fixture(scope="module")
def report(sol, tr, h):
    return run_suite(sol, tr, h=h, provenance="sha256:test")


class TestSuite:
    def test_all_pass(self, report):
        assert report.passed, report.failures()

    def test_fields(self, report):
        data = json.loads(report.to_json())
        assert data["provenance"] == "sha256:test"
        for name, c in data["checks"].items():
            assert set(c) == {"pass", "worst_residual", "location", "tolerance", "details"}, name
            float(c["worst_residual"])
            float(c["tolerance"])

    def test_expected_checks_present(self, report):
        names = set(report.checks)
        assert {
            "helmholtz_v",
            "constraint_system",
            "epsilon_conditions",
            "mu_decreasing",
            "equal_angle_z0",
            "u_nonnegative",
            "dirichlet",
            "neumann",
            "pde_residual",
            "interior_nodal_curves",
            "v_sign_regions",
            "h_even",
            "oracle_u",
            "oracle_h",
        } <= names

    def test_overall_iff_all(self, report):
        assert report.passed == all(c.passed for c in report.checks.values())

    def test_missing_inputs(self, sol, tr0, sol0):
        with pytest.raises(ConfigError):
            run_suite(None, tr0)
        with pytest.raises(ConfigError):
            run_suite(sol0, tr0)


class TestTolerances:
    @given(worst=st.floats(0, 1), tol=st.floats(1e-12, 1), factor=st.floats(1, 1e6))
    def test_loosening_never_fails(self, worst, tol, factor):
        if _check(worst, tol).passed:
            assert _check(worst, tol * factor).passed

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            ReportConfig(tol_pde=0.0)
        with pytest.raises(ConfigError):
            ReportConfig(topology_grid=32)

    def test_loosened_checks_still_pass(self, sol, h, pert, eps):
        a = pde_check(sol, h, 2000, 0, 1e-6)
        b = pde_check(sol, h, 2000, 0, 1e-3)
        assert a.passed and b.passed and a.worst_residual == b.worst_residual


class TestDeterminism:
    def test_seeded_checks_repeat(self, pert, eps):
        a = helmholtz_check(eps, pert, 5000, 7, 1e-11)
        b = helmholtz_check(eps, pert, 5000, 7, 1e-11)
        assert a.to_dict() == b.to_dict()


class TestRays:
    def test_six_equal_angles(self, pert, eps):
        ang = np.degrees(equal_angle_rays(eps, pert, 1e-3, 3600))
        assert ang.size == 6
        assert np.allclose(ang, [30, 90, 150, 210, 270, 330], atol=1e-3)

    def test_unperturbed_also_six(self):
        ang = np.degrees(equal_angle_rays(0.0, None, 1e-2, 3600))
        assert np.allclose(ang, [30, 90, 150, 210, 270, 330], atol=1e-6)


class TestTopology:
    def test_counts(self, sol):
        t = nodal_topology(sol, 1001)
        assert (t["domains_u"], t["curves_u"], t["regions_v"]) == (3, 2, 6)

    def test_neck_columns(self, dom):
        xs, ys, meta = topology_grid(dom, 101)
        assert xs[50] == 0.0 and ys[50] == 0.0
        assert 0 < xs[51] < meta["neck"]
        assert np.all(np.diff(xs) > 0)

    def test_neck_matters_for_v(self, sol, monkeypatch):
        # a uniform grid cannot see the neck and splits the middle regions of v
        import nodalcx.verify as V

        orig = V.topology_grid

        def uniform(dom, n):
            xs, ys, meta = orig(dom, n)
            xs = np.linspace(xs[0], xs[-1], xs.size)
            return xs, ys, meta

        monkeypatch.setattr(V, "topology_grid", uniform)
        assert nodal_topology(sol, 501)["regions_v"] == 8


class TestFigures:
    def test_three_svgs(self, sol, tr, tmp_path):
        res = compare_figures(sol, tr, tmp_path / "a", n=201)
        assert set(res["paths"]) == {"u_nodal", "v_sign", "w_lines"}
        for p in res["paths"].values():
            text = open(p).read()
            assert text.startswith("<?xml") and "<svg" in text
        assert res["interior_curves_u"] == 2
        assert res["v_sign_regions"] == 6
        # every vertex of the ε = 0 contour lies on one of the straight zero lines
        assert res["w_line_deviation"] < 0.5 * res["w_grid_step"]

    def test_reproducible(self, sol, tr, tmp_path):
        a = compare_figures(sol, tr, tmp_path / "a", n=101)
        b = compare_figures(sol, tr, tmp_path / "b", n=101)
        for k in a["paths"]:
            assert open(a["paths"][k], "rb").read() == open(b["paths"][k], "rb").read()
