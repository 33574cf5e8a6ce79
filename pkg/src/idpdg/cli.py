"""Command-line driver: ``idpdg run|riemann|dmr|verify``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import output
from .cases import RIEMANN_CASES, setup
from .config import CaseConfig, ConfigError, echo_config, load_config
from .idp import PseudoEquilibriumError
from .physics import InadmissibleStateError
from .timeloop import Solver, StepTooLarge
from .verify import run_suite

log = logging.getLogger("idpdg")

NUMERICAL_ERRORS = (InadmissibleStateError, PseudoEquilibriumError, StepTooLarge, FloatingPointError)


def run_case(cfg: CaseConfig, write: bool = True) -> dict:
    """Run a configured case; returns a summary and writes outputs to ``cfg.output``."""
    S = setup(cfg)
    solver = Solver(S.op, S.solver)
    extremes = {"min_rho": np.inf, "max_rho": -np.inf, "min_rho_point": np.inf, "max_rho_point": -np.inf}

    def track(state):
        # cell averages and the volume point values, over the whole run
        rho = S.op.cell_average(state.field)[:, 0]
        pts = S.op.volume_values(state.field)[..., 0]
        extremes["min_rho"] = min(extremes["min_rho"], float(rho.min()))
        extremes["max_rho"] = max(extremes["max_rho"], float(rho.max()))
        extremes["min_rho_point"] = min(extremes["min_rho_point"], float(pts.min()))
        extremes["max_rho_point"] = max(extremes["max_rho_point"], float(pts.max()))

    t0 = time.perf_counter()
    state = solver.run(S.field, S.t_final, max_steps=cfg.max_steps, callback=track)
    wall = time.perf_counter() - t0
    if state.step == 0:
        track(state)
    summary = {
        "case": cfg.case, "scheme": cfg.scheme, "mode": cfg.mode, "p": cfg.p,
        "elements": S.op.n_elements, "t_final": S.t_final, "time": state.time,
        "wall_seconds": wall, **extremes, **output.run_aggregates(state.stats),
    }
    if S.exact is not None and state.time > 0.0:
        summary["l1_rho"] = output.l1_density_error(S.op, state.field, S.exact, state.time)
    if cfg.verify:
        v = state.verify
        summary["verify"] = {k: getattr(v, k) for k in (
            "stages", "violations", "worst_bound_slack", "worst_identity", "worst_balance",
            "worst_domination", "min_rho", "min_rhoe")}
    if write:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(echo_config(cfg))
        output.write_stats_csv(out / "stats.csv", state.stats)
        if S.op.dim == 1:
            x, u = output.sample_profile(S.op, state.field, cfg.samples)
            output.write_profile_csv(out / "profile.csv", x, u)
        else:
            output.write_vtk(out / "solution.vtk", S.op, state.field)
        output.write_summary(out / "summary.json", summary)
    return summary


def _print_summary(summary: dict) -> None:
    keys = ("case", "scheme", "mode", "p", "elements", "time", "steps", "iter_mean",
            "min_rho", "max_rho", "min_rho_point", "max_rho_point", "l1_rho", "wall_seconds")
    print(" ".join(f"{k}={summary[k]:.6g}" if isinstance(summary[k], float) else f"{k}={summary[k]}"
                   for k in keys if k in summary))
    if "verify" in summary:
        v = summary["verify"]
        print("verify " + " ".join(f"{k}={v[k]:.3g}" if isinstance(v[k], float) else f"{k}={v[k]}"
                                   for k in v))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="idpdg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log retries and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_args(p):
        p.add_argument("--config", type=Path, help="config file (key = value, [sections])")
        p.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides")

    add_run_args(sub.add_parser("run", help="run the case named in the config"))
    rp = sub.add_parser("riemann", help="1D Riemann problem")
    rp.add_argument("case", choices=sorted(RIEMANN_CASES))
    add_run_args(rp)
    add_run_args(sub.add_parser("dmr", help="Mach 10 shock reflection over a wedge"))
    vp = sub.add_parser("verify", help="run property suites")
    vp.add_argument("suite", nargs="?", default="all")
    vp.add_argument("--report", type=Path, help="also write the report to this file")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify":
        try:
            checks = run_suite(args.suite)
        except KeyError as err:
            print(f"error: {err.args[0]}", file=sys.stderr)
            return 2
        lines = [c.line() for c in checks]
        print("\n".join(lines))
        if args.report:
            args.report.write_text("\n".join(lines) + "\n")
        return 0 if all(c.passed for c in checks) else 1

    overrides = list(args.overrides)
    if args.command == "riemann":
        overrides.insert(0, f"case={args.case}")
    elif args.command == "dmr":
        overrides.insert(0, "case=dmr")
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        summary = run_case(cfg)
    except NUMERICAL_ERRORS as err:
        print(f"numerical failure: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    _print_summary(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
