"""File formats shared by the pipeline stages.

Reals are written as decimal strings with 17 significant digits, so every
double survives a round trip and files diff cleanly.  Nothing time- or
host-dependent is written, which keeps reruns byte-identical.
"""
from __future__ import annotations

import csv
import json
import math
import pathlib

import numpy as np

from .coeffs import Perturbation
from .errors import ConfigError, StageOrderError
from .nodal import BY_Y, NodalCurve, TraceResult, derive_interior
from .solution import SourceH

MANIFEST = "manifest.json"
TRACE = "trace.json"
MU_CSV = "mu.csv"
INTERIOR_CSV = "interior.csv"
BUILD = "build.json"
BOUNDARY_CSV = "boundary.csv"
U_GRID_CSV = "u_grid.csv"
H_CSV = "h.csv"
REPORT = "report.json"
FIGURES = "figures.json"
FIGURE_DIR = "figures"


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    pathlib.Path(path).write_text(text, encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(pathlib.Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def require(out: pathlib.Path, name: str, stage: str, producer: str) -> pathlib.Path:
    path = out / name
    if not path.exists():
        raise StageOrderError(f"{stage} needs {path}; run '{producer}' first")
    return path


def load_perturbation(manifest: dict) -> tuple[Perturbation, float]:
    return Perturbation.from_dict(manifest["perturbation"]), float(manifest["epsilon"])


def load_trace(out: pathlib.Path, eps: float, p) -> TraceResult:
    meta = read_json(require(out, TRACE, "this stage", "trace"))
    mu = NodalCurve.read_csv(out / MU_CSV, BY_Y)
    return TraceResult(
        s=float(meta["s"]),
        mu=mu,
        interior=derive_interior(mu, eps, p),
        epsilon=eps,
        window=float(meta["window"]),
    )


def write_boundary(path, x, y) -> None:
    _write_rows(path, ["x", "y"], zip(x, y))


def write_grid(path, xs, ys, u) -> None:
    """Long format ``x, y, u``; ``nan`` outside Ω."""
    rows = ((x, y, u[j, i]) for j, y in enumerate(ys) for i, x in enumerate(xs))
    _write_rows(path, ["x", "y", "u"], rows)


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if math.isfinite(v) else "nan" for v in r])


def load_h(out: pathlib.Path, meta: dict) -> SourceH:
    data = np.loadtxt(out / H_CSV, delimiter=",", skiprows=1, ndmin=2)
    keep = data[:, 0] >= 0
    return SourceH(
        data[keep, 0].copy(),
        data[keep, 1].copy(),
        float(meta["s"]),
        float(meta["h_at_s"]),
        {k: float(v) for k, v in meta["h_extrapolation"].items()},
    )
