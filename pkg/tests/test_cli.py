import json

import numpy as np
import pytest

from idpdg import cli
from idpdg.cases import dmr_states, setup
from idpdg.config import parse_config
from idpdg.timeloop import Solver


def run(argv):
    return cli.main([str(a) for a in argv])


def test_riemann_outputs(tmp_path, capsys):
    out = tmp_path / "sod"
    assert run(["riemann", "sod", "n=20", "p=2", "t_final=0.05", f"output={out}"]) == 0
    assert "case=sod" in capsys.readouterr().out
    for name in ("config.ini", "stats.csv", "profile.csv", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["min_rho"] > 0 and summary["time"] == 0.05 and summary["l1_rho"] < 0.05
    assert len((out / "profile.csv").read_text().splitlines()) == 1 + 20 * 10
    assert "p = 2" in (out / "config.ini").read_text().splitlines()


def test_runs_are_bit_identical(tmp_path):
    args = ["riemann", "lax", "n=20", "p=3", "t_final=0.04", "mode=idploc"]
    assert run(args + [f"output={tmp_path / 'a'}"]) == 0
    assert run(args + [f"output={tmp_path / 'b'}"]) == 0
    for name in ("stats.csv", "profile.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_config_file_and_run_command(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("case = smooth_wave\n[mesh]\nn = 10\n[time]\nt_final = 0.02\n")
    assert run(["run", "--config", path, f"output={tmp_path / 'o'}", "scheme=modal_dg"]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["scheme"] == "modal_dg" and summary["l1_rho"] < 1e-3


@pytest.mark.parametrize("argv", [
    ["run", "p=2"],                                   # no case
    ["riemann", "sod", "flux=roe"],
    ["riemann", "sod", "colour=blue"],
    ["run", "--config", "/nonexistent.ini"],
    ["run", "case=smooth_wave", "domain=0 2"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert run(argv + [f"output={tmp_path}"]) == 2
    assert "config error" in capsys.readouterr().err


def test_numerical_failure_exits_1(tmp_path, capsys):
    assert run(["riemann", "lax", "mode=none", "n=50", f"output={tmp_path}"]) == 1
    assert "InadmissibleStateError" in capsys.readouterr().err


def test_verify_closure(tmp_path, capsys):
    report = tmp_path / "report.txt"
    assert run(["verify", "closure", "--report", report]) == 0
    lines = report.read_text().splitlines()
    assert lines and all(l.split()[-1] == "PASS" for l in lines)
    assert capsys.readouterr().out.splitlines() == lines
    assert run(["verify", "nonsense"]) == 2


def test_small_dmr_writes_vtk(tmp_path):
    out = tmp_path / "dmr"
    assert run(["dmr", "nx=12", "ny=8", "p=2", "max_steps=3", f"output={out}"]) == 0
    text = (out / "solution.vtk").read_text()
    assert text.startswith("# vtk DataFile Version 3.0") and "SCALARS density double 1" in text
    s = json.loads((out / "summary.json").read_text())
    assert s["elements"] == 96 and 0 < s["min_rho"] <= s["max_rho"] < 25
    assert s["min_rho_point"] <= s["min_rho"] and s["max_rho_point"] >= s["max_rho"]


def test_dmr_preshock_region_is_untouched_early():
    cfg = parse_config("", ["case=dmr", "nx=24", "ny=16", "p=2", "max_steps=4"])
    S = setup(cfg)
    st = Solver(S.op, S.solver).run(S.field, S.t_final, max_steps=cfg.max_steps)
    pre, post = dmr_states()
    far = S.op.geom.y[..., 0].min(axis=1) > 1.0
    vals = S.op.volume_values(st.field)[far]
    assert far.sum() > 0 and np.abs(vals - pre).max() < 1e-12
    assert np.allclose(pre, [1.4, 0, 0, 2.5]) and np.isclose(post[0], 8.0)


def test_dmr_mirrors_the_bottom_ahead_of_the_wedge():
    from idpdg.mesh import BoundaryTag
    S = setup(parse_config("", ["case=dmr", "nx=12", "ny=8", "p=1"]))
    tags = {tag for (e, f), tag in S.mesh.boundary.items() if f == 0}
    assert tags == {BoundaryTag.SYMMETRY, BoundaryTag.SLIP_WALL}
