from __future__ import annotations

import hashlib
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nodalcx.cli import EXIT_CONSTRUCT, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, RunConfig, main
from nodalcx.errors import ConfigError


def digest(d):
    return {p.relative_to(d).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", "--out", str(out)]) == EXIT_OK
    return out


class TestPipeline:
    def test_files(self, run_dir):
        for name in (
            "manifest.json",
            "trace.json",
            "mu.csv",
            "interior.csv",
            "build.json",
            "boundary.csv",
            "u_grid.csv",
            "h.csv",
            "report.json",
            "figures.json",
            "figures/u_nodal.svg",
            "figures/v_sign.svg",
            "figures/w_lines.svg",
        ):
            assert (run_dir / name).is_file(), name

    def test_manifest(self, run_dir):
        m = json.loads((run_dir / "manifest.json").read_text())
        assert m["waveset"] == [6, 8, 10, 12, 14]
        assert len(m["perturbation"]["d"]) == 5
        assert float(m["epsilon"]) == math.ldexp(1.0, -42)
        assert m["conditions"]["pass"] is True
        assert all(isinstance(v, str) for v in m["conditions"]["margins"].values())
        # 17 significant digits reproduce the doubles exactly
        d = [float(v) for v in m["perturbation"]["d"]]
        assert all(format(v, ".17g") == s for v, s in zip(d, m["perturbation"]["d"]))

    def test_report(self, run_dir):
        r = json.loads((run_dir / "report.json").read_text())
        assert r["pass"] is True
        digest_ = hashlib.sha256((run_dir / "manifest.json").read_bytes()).hexdigest()
        assert r["provenance"] == "sha256:" + digest_

    def test_exports(self, run_dir):
        g = np.genfromtxt(run_dir / "u_grid.csv", delimiter=",", skip_header=1)
        assert g.shape == (201 * 201, 3)
        inside = ~np.isnan(g[:, 2])
        assert 0 < inside.sum() < g.shape[0]
        assert np.nanmin(g[:, 2]) > -1e-11
        b = np.loadtxt(run_dir / "boundary.csv", delimiter=",", skiprows=1)
        assert b.shape[1] == 2
        h = np.loadtxt(run_dir / "h.csv", delimiter=",", skiprows=1)
        assert np.array_equal(h[:, 1], h[::-1, 1])

    def test_figures_record(self, run_dir):
        f = json.loads((run_dir / "figures.json").read_text())
        assert f["interior_curves_u"] == 2 and f["v_sign_regions"] == 6

    def test_idempotent(self, run_dir):
        before = digest(run_dir)
        for stage in ("construct", "trace", "build", "verify", "render"):
            assert main([stage, "--out", str(run_dir)]) == EXIT_OK
        assert digest(run_dir) == before

    def test_failed_report_blocks_render(self, run_dir, tmp_path):
        import shutil

        out = tmp_path / "copy"
        shutil.copytree(run_dir, out)
        r = json.loads((out / "report.json").read_text())
        r["pass"] = False
        (out / "report.json").write_text(json.dumps(r))
        assert main(["render", "--out", str(out)]) == EXIT_USAGE


class TestErrors:
    def test_stage_order(self, tmp_path, capsys):
        assert main(["verify", "--out", str(tmp_path)]) == EXIT_USAGE
        assert "build" in capsys.readouterr().err
        assert main(["trace", "--out", str(tmp_path / "none")]) == EXIT_USAGE

    def test_fixed_epsilon_failure_names_condition(self, tmp_path, capsys):
        assert main(["construct", "--out", str(tmp_path), "--epsilon", "0.01"]) == EXIT_CONSTRUCT
        err = capsys.readouterr().err
        assert "global_sign" in err and "[construct]" in err

    @pytest.mark.parametrize(
        "argv",
        [
            ["bogus"],
            ["construct", "--start-k", "7"],
            ["construct", "--start-k", "x"],
            ["construct", "--epsilon", "-1"],
            ["construct", "--grid", "10"],
            ["construct", "--config", "/nonexistent.json"],
        ],
    )
    def test_usage(self, argv, tmp_path):
        with pytest.raises(SystemExit) as e:
            code = main(argv + ["--out", str(tmp_path)] if argv != ["bogus"] else argv)
            raise SystemExit(code)
        assert e.value.code == EXIT_USAGE

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"start_k": 6, "colour": "red"}))
        assert main(["construct", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE

    def test_verification_failure_exit(self, run_dir, tmp_path):
        import shutil

        out = tmp_path / "strict"
        shutil.copytree(run_dir, out)
        m = json.loads((out / "manifest.json").read_text())
        # demand an impossible PDE residual: the suite must report failure
        m["config"]["verify"] = {"tol_pde": 1e-30}
        (out / "manifest.json").write_text(json.dumps(m))
        assert main(["verify", "--out", str(out)]) == EXIT_VERIFY
        r = json.loads((out / "report.json").read_text())
        assert r["checks"]["pde_residual"]["pass"] is False


class TestConfig:
    def test_defaults(self):
        c = RunConfig()
        assert c.start_k == 6 and c.epsilon == "auto"
        assert RunConfig.from_dict(c.to_dict()) == c

    def test_invalid(self):
        with pytest.raises(ConfigError):
            RunConfig(verify={"tol_pde": -1})
        with pytest.raises(ConfigError):
            RunConfig(verify={"nope": 1})
        with pytest.raises(ConfigError):
            RunConfig(epsilon="big")


def test_start_k_8_construct(tmp_path):
    assert main(["construct", "--out", str(tmp_path), "--start-k", "8"]) == EXIT_OK
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["waveset"] == [8, 10, 12, 14, 16]
    assert m["conditions"]["pass"] is True


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nodalcx", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip() == "0.1.0"
