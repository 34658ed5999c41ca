"""Command-line driver: construct, trace, build, verify, render.

Each stage reads its inputs from the output directory and writes its own
files there, so any stage can be rerun on its own.  Exit codes: 0 pass,
1 verification failure, 2 construction failure, 3 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import pathlib
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import artifacts as art
from .coeffs import select_waveset, solve_perturbation
from .epsilon import evaluate_epsilon, select_epsilon
from .errors import ConfigError, ConstructionError, StageOrderError
from .nodal import DEFAULT_SAMPLES, DEFAULT_WINDOW, trace
from .solution import SolutionU, build_domain, build_h
from .verify import ReportConfig, compare_figures, manifest_hash, run_suite

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONSTRUCT = 2
EXIT_USAGE = 3


@dataclass(frozen=True)
class RunConfig:
    start_k: int = 6
    epsilon: str | float = "auto"
    trace_samples: int = DEFAULT_SAMPLES
    grid: int = 201
    figure_grid: int = 401
    boundary_samples: int = 2000
    verify: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.start_k, int) or self.start_k % 2 or self.start_k <= 4:
            raise ConfigError(f"start_k must be an even integer > 4, got {self.start_k!r}")
        if self.epsilon != "auto":
            try:
                e = float(self.epsilon)
            except (TypeError, ValueError):
                raise ConfigError(f"epsilon must be 'auto' or a number, got {self.epsilon!r}") from None
            if not (math.isfinite(e) and e > 0):
                raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")
            object.__setattr__(self, "epsilon", e)
        for name in ("grid", "figure_grid", "trace_samples"):
            if int(getattr(self, name)) < 64:
                raise ConfigError(f"{name} must be at least 64")
        if self.boundary_samples < 16:
            raise ConfigError("boundary_samples must be at least 16")
        self.report_config()

    def report_config(self) -> ReportConfig:
        known = {f.name for f in dataclasses.fields(ReportConfig)}
        bad = sorted(set(self.verify) - known)
        if bad:
            raise ConfigError(f"unknown verify settings: {', '.join(bad)}")
        try:
            return ReportConfig(**self.verify)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["epsilon"] != "auto":
            d["epsilon"] = art.fmt(d["epsilon"])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        bad = sorted(set(data) - known)
        if bad:
            raise ConfigError(f"unknown config keys: {', '.join(bad)}")
        return cls(**data)


def resolve_config(args) -> RunConfig:
    data = {}
    if args.config:
        path = pathlib.Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        data = art.read_json(path)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    if args.start_k is not None:
        data["start_k"] = args.start_k
    if args.epsilon is not None:
        data["epsilon"] = args.epsilon
    if args.grid is not None:
        data["grid"] = args.grid
    return RunConfig.from_dict(data)


# --- stages --------------------------------------------------------------------


def cmd_construct(config: RunConfig, out: pathlib.Path) -> dict:
    """Waveset, coefficients and a certified ε; writes the manifest."""
    ws = select_waveset(config.start_k)
    p = solve_perturbation(ws)
    if config.epsilon == "auto":
        eps, report = select_epsilon(p)
    else:
        eps = float(config.epsilon)
        report = evaluate_epsilon(eps, p)
        if not report.passed:
            bad = sorted(k for k, v in report.margins.items() if not v > 0)
            raise ConstructionError(f"ε = {eps:.17g} fails: {', '.join(bad)}")
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "waveset": list(ws.k),
        "perturbation": p.to_dict(),
        "epsilon": art.fmt(eps),
        "conditions": report.to_dict(),
    }
    art.write_json(out / art.MANIFEST, manifest)
    return manifest


def _manifest(out: pathlib.Path, stage: str) -> dict:
    return art.read_json(art.require(out, art.MANIFEST, stage, "construct"))


def cmd_trace(out: pathlib.Path) -> dict:
    manifest = _manifest(out, "trace")
    p, eps = art.load_perturbation(manifest)
    cfg = RunConfig.from_dict(manifest["config"])
    tr = trace(eps, p, n_samples=cfg.trace_samples, window=DEFAULT_WINDOW)
    tr.mu.write_csv(out / art.MU_CSV)
    tr.interior.write_csv(out / art.INTERIOR_CSV)
    meta = {
        "s": art.fmt(tr.s),
        "epsilon": art.fmt(eps),
        "window": art.fmt(tr.window),
        "samples": len(tr.mu),
        "mu_0": art.fmt(tr.mu.coord[0]),
    }
    art.write_json(out / art.TRACE, meta)
    return meta


def _load_solution(out: pathlib.Path, stage: str):
    manifest = _manifest(out, stage)
    art.require(out, art.TRACE, stage, "trace")
    p, eps = art.load_perturbation(manifest)
    tr = art.load_trace(out, eps, p)
    dom = build_domain(tr, eps, p)
    return manifest, p, eps, tr, SolutionU(dom)


def cmd_build(out: pathlib.Path, grid: int | None = None) -> dict:
    manifest, p, eps, tr, sol = _load_solution(out, "build")
    cfg = RunConfig.from_dict(manifest["config"])
    n = grid or cfg.grid
    dom = sol.domain
    h = build_h(sol, tr)
    bx, by = dom.boundary_points(cfg.boundary_samples)
    order = np.argsort(np.arctan2(by, bx))
    art.write_boundary(out / art.BOUNDARY_CSV, bx[order], by[order])
    x0, x1, y0, y1 = dom.bounding_box()
    xs = np.linspace(x0, x1, n)
    ys = np.linspace(y0, y1, n)
    art.write_grid(out / art.U_GRID_CSV, xs, ys, sol.grid(xs, ys))
    h.write_csv(out / art.H_CSV)
    meta = {
        "s": art.fmt(dom.s),
        "sigma": dom.sigma,
        "epsilon": art.fmt(eps),
        "grid": [n, n],
        "bounding_box": [art.fmt(v) for v in (x0, x1, y0, y1)],
        "h_at_s": art.fmt(h.h_at_s),
        "h_extrapolation": {k: art.fmt(v) for k, v in h.extrapolation.items()},
        "h_extension": "h is recorded on [-s, s] only; any even continuous extension is left to the consumer",
    }
    art.write_json(out / art.BUILD, meta)
    return meta


def cmd_verify(out: pathlib.Path) -> dict:
    art.require(out, art.BUILD, "verify", "build")
    manifest, p, eps, tr, sol = _load_solution(out, "verify")
    cfg = RunConfig.from_dict(manifest["config"])
    h = art.load_h(out, art.read_json(out / art.BUILD))
    prov = manifest_hash((out / art.MANIFEST).read_bytes())
    rep = run_suite(sol, tr, cfg.report_config(), h=h, provenance=prov)
    data = rep.to_dict()
    art.write_json(out / art.REPORT, data)
    return data


def cmd_render(out: pathlib.Path) -> dict:
    rep_path = art.require(out, art.REPORT, "render", "verify")
    if not art.read_json(rep_path).get("pass"):
        raise StageOrderError("render needs a passing verification report")
    manifest, p, eps, tr, sol = _load_solution(out, "render")
    cfg = RunConfig.from_dict(manifest["config"])
    res = compare_figures(sol, tr, out / art.FIGURE_DIR, n=cfg.figure_grid)
    res["paths"] = {k: str(pathlib.Path(v).relative_to(out)) for k, v in res["paths"].items()}
    res = {k: (art.fmt(v) if isinstance(v, float) else v) for k, v in res.items()}
    art.write_json(out / art.FIGURES, res)
    return res


# --- argument parsing ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    return v


def _epsilon(text):
    if text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="DIR", default="run", help="artifact directory (default: run)")
    common.add_argument("--epsilon", type=_epsilon, metavar="VAL", help="fixed ε, or 'auto' (default)")
    common.add_argument("--start-k", type=_int, metavar="N", help="first wavenumber (even, > 4)")
    common.add_argument("--grid", type=_int, metavar="N", help="side of the exported u grid")
    ap = _Parser(prog="nodalcx", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (
        ("construct", "select the waveset, solve for ψ and certify ε"),
        ("trace", "trace s, μ and the interior nodal curve"),
        ("build", "export Ω, u and h"),
        ("verify", "run the verification suite"),
        ("render", "write the three SVG figures"),
        ("run", "all five stages in order"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return ap


def _run_stage(name: str, args) -> int:
    out = pathlib.Path(args.out)
    if name == "construct":
        config = resolve_config(args)
        out.mkdir(parents=True, exist_ok=True)
        m = cmd_construct(config, out)
        print(f"construct: k = {m['waveset']}, ε = {m['epsilon']}")
        return EXIT_OK
    if not out.is_dir():
        raise StageOrderError(f"{out} does not exist; run 'construct' first")
    if name == "trace":
        meta = cmd_trace(out)
        print(f"trace: s = {meta['s']}, {meta['samples']} samples")
    elif name == "build":
        meta = cmd_build(out, args.grid)
        print(f"build: σ = {meta['sigma']}, grid {meta['grid'][0]}x{meta['grid'][1]}")
    elif name == "verify":
        data = cmd_verify(out)
        failed = [k for k, c in data["checks"].items() if not c["pass"]]
        print(f"verify: {len(data['checks']) - len(failed)}/{len(data['checks'])} checks pass")
        for k in failed:
            c = data["checks"][k]
            print(f"  FAIL {k}: {c['worst_residual']} > {c['tolerance']}", file=sys.stderr)
        if failed:
            return EXIT_VERIFY
    elif name == "render":
        res = cmd_render(out)
        print(f"render: {', '.join(res['paths'].values())}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    stages = ("construct", "trace", "build", "verify", "render") if args.command == "run" else (args.command,)
    try:
        # later stages read the manifest's config, but bad flags are still usage errors
        resolve_config(args)
        for st in stages:
            code = _run_stage(st, args)
            if code:
                return code
    except (ConfigError, StageOrderError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConstructionError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
