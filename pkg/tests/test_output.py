import csv

import numpy as np
import pytest

from idpdg import output
from idpdg.cases import RIEMANN_CASES, smooth_wave_exact
from idpdg.discretization import build_operator
from idpdg.mesh import BoundaryTag, QuadMeshSpec, build_quad_mesh, build_segment_mesh
from idpdg.physics import conserved, primitive


def test_sample_points_are_uniform_cell_centres():
    s = output.sample_points_1d(10)[:, 0]
    assert np.allclose(np.diff(s), 0.2) and np.isclose(s[0], -0.9)


def test_profile_csv_round_trips_doubles(tmp_path):
    mesh = build_segment_mesh(0, 1, 7, BoundaryTag.PERIODIC, BoundaryTag.PERIODIC)
    op = build_operator(mesh, "modal_dg", 3)
    field = op.project(lambda y: smooth_wave_exact(y[..., 0], 0.0))
    x, u = output.sample_profile(op, field, 10)
    assert len(x) == 70 and np.all(np.diff(x) > 0)
    output.write_profile_csv(tmp_path / "p.csv", x, u)
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["x", "rho", "u", "p"]
    back = np.array(rows[1:], dtype=float)
    rho, vel, p = primitive(u)
    assert np.array_equal(back[:, 0], x) and np.array_equal(back[:, 1], rho)
    assert np.array_equal(back[:, 2], vel[:, 0]) and np.array_equal(back[:, 3], p)


def test_l1_error_of_exact_data():
    mesh = build_segment_mesh(0, 1, 10, BoundaryTag.PERIODIC, BoundaryTag.PERIODIC)
    op = build_operator(mesh, "modal_dg", 2)
    lin = lambda y: conserved(1 + 0.3 * y[..., 0], 0 * y, 1 + 0 * y[..., 0])
    exact = lambda x, t: conserved(1 + 0.3 * x, 0 * x[..., None], 1 + 0 * x)
    assert output.l1_density_error(op, op.project(lin), exact, 0.1) < 1e-14
    # a constant offset integrates to the domain length
    shifted = lambda x, t: exact(x, t) + np.array([0.01, 0, 0])
    assert np.isclose(output.l1_density_error(op, op.project(lin), shifted, 0.1), 0.01)


def test_l1_error_of_sod_projection_is_small():
    case = RIEMANN_CASES["sod"]
    op = build_operator(build_segment_mesh(*case.domain, 100), "dgsem", 3)
    err = output.l1_density_error(op, op.project(case.initial()), case.exact_at, 1e-9)
    # only the element holding the jump contributes
    assert err < 0.875 * 0.01


def test_stats_csv(tmp_path):
    stats = [{"step": 1, "time": 0.1, "dt": 0.1, "activations": 2, "theta_mean": 1 / 3,
              "theta_max": 0.5, "iter_mean": 1.25, "gate_skips": 0}]
    output.write_stats_csv(tmp_path / "s.csv", stats)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert tuple(rows[0]) == output.STATS_COLUMNS
    assert rows[1][0] == "1" and float(rows[1][4]) == 1 / 3 and rows[1][4] == "0.33333333333333331"
    agg = output.run_aggregates(stats)
    assert agg["steps"] == 1 and agg["activations"] == 2 and agg["iter_mean"] == 1.25
    assert output.run_aggregates([])["iter_mean"] == 1.0


def test_vtk_structure(tmp_path):
    mesh = build_quad_mesh(QuadMeshSpec(3, 2, domain=(0, 3, 0, 2)))
    op = build_operator(mesh, "dgsem", 2)
    field = op.constant_field(conserved(np.array(1.4), np.array([0.5, -0.25]), np.array(1.0)))
    output.write_vtk(tmp_path / "s.vtk", op, field)
    lines = (tmp_path / "s.vtk").read_text().splitlines()
    assert lines[:4] == ["# vtk DataFile Version 3.0", "idpdg solution", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    npts, ncell = 6 * 9, 6 * 4
    assert lines[4] == f"POINTS {npts} double"
    i = lines.index(f"CELLS {ncell} {5 * ncell}")
    assert lines[lines.index(f"CELL_TYPES {ncell}") + 1] == "9"
    conn = np.array([l.split() for l in lines[i + 1:i + 1 + ncell]], dtype=int)
    assert np.all(conn[:, 0] == 4) and conn[:, 1:].max() == npts - 1
    pts = np.array([l.split() for l in lines[5:5 + npts]], dtype=float)
    assert pts[:, 0].min() == 0 and pts[:, 0].max() == 3 and pts[:, 1].max() == 2
    d = lines.index("SCALARS density double 1")
    assert all(float(v) == 1.4 for v in lines[d + 2:d + 2 + npts])
    v = lines.index("VECTORS velocity double")
    assert lines[v + 1] == "0.5 -0.25 0"
    with pytest.raises(ValueError):
        output.write_vtk(tmp_path / "x.vtk", build_operator(build_segment_mesh(0, 1, 2), "dgsem", 1), None)


def test_summary_is_plain_json(tmp_path):
    import json
    output.write_summary(tmp_path / "s.json", {"a": np.float64(1.5), "b": {"c": np.int64(2)}, "d": "x"})
    assert json.loads((tmp_path / "s.json").read_text()) == {"a": 1.5, "b": {"c": 2}, "d": "x"}
