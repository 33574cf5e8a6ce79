"""Writers for profiles, statistics, summaries and legacy VTK files; L1 error norms."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import quadrature as quad
from .discretization import FieldState, SchemeOperator
from .mesh import map_points
from .physics import DEFAULT_GAS, GasModel, primitive

FMT = "{:.17g}"
STATS_COLUMNS = ("step", "time", "dt", "activations", "theta_mean", "theta_max", "iter_mean", "gate_skips")


def sample_points_1d(samples: int) -> np.ndarray:
    """Cell-centred uniform reference points on (-1, 1)."""
    return (-1.0 + (2.0 * np.arange(samples) + 1.0) / samples)[:, None]


def sample_profile(op: SchemeOperator, field: FieldState, samples: int = 10):
    """Positions and states at ``samples`` uniform points per element, sorted by x (1D)."""
    if op.dim != 1:
        raise ValueError("profiles are 1D only")
    u, x = op.evaluate(field, sample_points_1d(samples))
    x = x[..., 0].ravel()
    u = u.reshape(-1, u.shape[-1])
    order = np.argsort(x, kind="stable")
    return x[order], u[order]


def write_profile_csv(path, x, u, gas: GasModel = DEFAULT_GAS) -> None:
    rho, vel, p = primitive(u, gas)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "rho", "u", "p"])
        for row in zip(x, rho, vel[:, 0], p):
            w.writerow([FMT.format(v) for v in row])


def l1_density_error(op: SchemeOperator, field: FieldState, exact, t: float, n_points: int | None = None) -> float:
    """L1 norm of rho_h - rho over the mesh, by Gauss-Legendre quadrature per element."""
    rule = quad.gauss_legendre(n_points or op.p + 3)
    ref, w = quad.tensor_rule(rule, op.dim)
    u, x = op.evaluate(field, ref)
    _, jac = map_points(op.mesh, ref)
    det = np.abs(np.linalg.det(jac))
    rho_ex = np.asarray(exact(x[..., 0] if op.dim == 1 else x, t))[..., 0]
    return float(np.sum(w * det * np.abs(u[..., 0] - rho_ex)))


def write_stats_csv(path, stats) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATS_COLUMNS)
        for row in stats:
            w.writerow([row[c] if isinstance(row[c], (int, np.integer)) else FMT.format(row[c])
                        for c in STATS_COLUMNS])


def run_aggregates(stats) -> dict:
    if not stats:
        return {"steps": 0, "iter_mean": 1.0, "activations": 0, "theta_mean": 0.0, "theta_max": 0.0}
    return {
        "steps": len(stats),
        "iter_mean": float(np.mean([s["iter_mean"] for s in stats])),
        "activations": int(sum(s["activations"] for s in stats)),
        "theta_mean": float(np.mean([s["theta_mean"] for s in stats])),
        "theta_max": float(max(s["theta_max"] for s in stats)),
        "dt_min": float(min(s["dt"] for s in stats)),
        "dt_max": float(max(s["dt"] for s in stats)),
    }


def write_summary(path, summary: dict) -> None:
    def clean(v):
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        return v
    Path(path).write_text(json.dumps(clean(summary), indent=2, sort_keys=True) + "\n")


def write_vtk(path, op: SchemeOperator, field: FieldState, gas: GasModel = DEFAULT_GAS,
              samples: int | None = None) -> None:
    """Legacy ASCII unstructured grid of sub-quads with point data rho, velocity, p (2D)."""
    if op.dim != 2:
        raise ValueError("VTK output is 2D only")
    n = samples or op.p + 1
    s = np.linspace(-1.0, 1.0, n)
    X, Y = np.meshgrid(s, s, indexing="xy")
    ref = np.stack([X.ravel(), Y.ravel()], axis=-1)
    u, x = op.evaluate(field, ref)
    K = u.shape[0]
    rho, vel, p = primitive(u, gas)
    base = np.arange(K)[:, None, None] * n * n
    j, i = np.meshgrid(np.arange(n - 1), np.arange(n - 1), indexing="ij")
    a = j * n + i
    quads = np.stack([a, a + 1, a + n + 1, a + n], axis=-1)[None] + base[..., None]
    quads = quads.reshape(-1, 4)
    pts = x.reshape(-1, 2)
    lines = ["# vtk DataFile Version 3.0", "idpdg solution", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(pts)} double"]
    lines += [f"{FMT.format(px)} {FMT.format(py)} 0" for px, py in pts]
    lines.append(f"CELLS {len(quads)} {5 * len(quads)}")
    lines += [f"4 {q[0]} {q[1]} {q[2]} {q[3]}" for q in quads]
    lines.append(f"CELL_TYPES {len(quads)}")
    lines += ["9"] * len(quads)
    lines.append(f"POINT_DATA {len(pts)}")
    lines += ["SCALARS density double 1", "LOOKUP_TABLE default"]
    lines += [FMT.format(v) for v in rho.ravel()]
    lines += ["SCALARS pressure double 1", "LOOKUP_TABLE default"]
    lines += [FMT.format(v) for v in p.ravel()]
    lines.append("VECTORS velocity double")
    lines += [f"{FMT.format(vx)} {FMT.format(vy)} 0" for vx, vy in vel.reshape(-1, 2)]
    Path(path).write_text("\n".join(lines) + "\n")
