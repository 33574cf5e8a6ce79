"""SSP Runge-Kutta time stepping with the IDP pipeline applied at every stage."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import idp
from .discretization import FieldState, SchemeOperator
from .idp import Floors, LimiterMode, LimiterReport, SmoothnessGate
from .physics import PSI_DENSITY, PSI_INTERNAL_ENERGY, InadmissibleStateError, admissible_mask, quasiconcave_value

log = logging.getLogger(__name__)

# Shu-Osher form: stage i = a_i * u^n + b_i * E(previous stage)
SSP_TABLES = {
    1: ((0.0, 1.0),),
    2: ((0.0, 1.0), (0.5, 0.5)),
    3: ((0.0, 1.0), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0)),
}


class StepTooLarge(RuntimeError):
    pass


@dataclass
class SolverConfig:
    mode: LimiterMode = LimiterMode.IDP
    floors: Floors = idp.DEFAULT_FLOORS
    gate: SmoothnessGate | None = field(default_factory=SmoothnessGate)
    cfl: float = 0.9
    rk_order: int = 3
    tol: float = 1e-12
    max_iter: int = 50
    max_retries: int = 3
    verify: bool = False
    slack: float = 1e-12


@dataclass
class StageData:
    u_minus: np.ndarray
    u_plus: np.ndarray
    h: np.ndarray
    speed: np.ndarray
    pe: idp.PseudoEquilibrium
    dt_max: float


@dataclass
class VerifyLog:
    """Worst values of the per-stage checks (verification runs)."""

    stages: int = 0
    violations: int = 0
    worst_bound_slack: float = np.inf
    worst_identity: float = 0.0
    worst_balance: float = 0.0
    worst_domination: float = np.inf
    min_rho: float = np.inf
    min_rhoe: float = np.inf


@dataclass
class RunState:
    field: FieldState
    time: float = 0.0
    step: int = 0
    dt_history: list = field(default_factory=list)
    stats: list = field(default_factory=list)
    totals: list = field(default_factory=list)
    verify: VerifyLog = field(default_factory=VerifyLog)


class Solver:
    """Forward-Euler stages with pseudo-equilibria, bounds and the scaling limiter."""

    def __init__(self, op: SchemeOperator, config: SolverConfig | None = None):
        self.op = op
        self.cfg = config or SolverConfig()
        if self.cfg.rk_order not in SSP_TABLES:
            raise ValueError("rk_order must be 1, 2 or 3")
        self.vlog = VerifyLog()

    # --- per-stage pieces ---------------------------------------------------
    def analyse(self, field: FieldState) -> StageData:
        op, cfg = self.op, self.cfg
        u_minus, u_plus = op.trace_eval(field)
        if not np.all(admissible_mask(u_minus)):
            bad = np.nonzero(~admissible_mask(u_minus))[0][0]
            raise InadmissibleStateError(element=int(bad))
        h, speed = op.face_fluxes(u_minus, u_plus)
        solve = (idp.pseudo_equilibrium_local if cfg.mode is LimiterMode.IDPLOC
                 else idp.pseudo_equilibrium_global)
        pe = solve(u_minus, u_plus, op.s, op.normals, op.gas, cfg.floors, cfg.tol,
                   cfg.max_iter, speed_pm=speed, wave_mode=op.wave_mode)
        dt_max = idp.compute_time_step(pe, speed, op.s, op.rule.beta, 1.0)
        return StageData(u_minus, u_plus, h, speed, pe, dt_max)

    def euler_stage(self, field: FieldState, dt: float, data: StageData | None = None):
        """One limited forward-Euler update; returns the new field and its report."""
        op, cfg = self.op, self.cfg
        if data is None:
            data = self.analyse(field)
        if dt > data.dt_max * (1.0 + 1e-12):
            raise StepTooLarge(f"dt {dt:.6e} exceeds the stage bound {data.dt_max:.6e}")
        R = op.residual(field, data.u_minus, data.u_plus, data.h)
        new = FieldState(field.coeffs - dt * R / op.mass[..., None], field.scheme, field.p)
        avg = op.cell_average(new)
        report = LimiterReport(theta=np.zeros(op.n_elements), activations=0,
                               iterations=data.pe.iterations)
        if cfg.mode is LimiterMode.NONE:
            return new, report
        if not np.all(admissible_mask(avg)):
            raise idp.IDPViolation("inadmissible cell average",
                                   element=int(np.nonzero(~admissible_mask(avg))[0][0]))
        vol_old = op.volume_values(field)
        need_candidates = cfg.verify or cfg.mode in (LimiterMode.IDP, LimiterMode.IDPLOC)
        cands = None
        if need_candidates:
            cands = idp.candidate_updates(data.u_minus, data.h, data.pe, op.s, op.rule.beta,
                                          op.normals, dt, op.gas)
        if cfg.verify:
            self._verify_stage(field, vol_old, cands, avg, data)
        bounds = idp.compute_bounds(vol_old, cands, cfg.mode, cfg.floors)
        if cfg.gate is not None and cfg.mode in (LimiterMode.IDP, LimiterMode.IDPLOC):
            smooth = idp.smoothness_gate(op, new, cfg.gate)
            report.gate_skips = int(smooth.sum())
            bounds.lower[PSI_DENSITY][smooth] = cfg.floors.rho_min
            bounds.lower[PSI_INTERNAL_ENERGY][smooth] = cfg.floors.rhoe_min
        new, theta = idp.scaling_limiter(op, new, avg, bounds)
        report.theta = theta
        report.activations = int(np.count_nonzero(theta > 0.0))
        if cfg.verify:
            self._verify_limited(new, bounds, avg)
        return new, report

    def _verify_stage(self, field, vol_old, cands, avg, data):
        op, v = self.op, self.vlog
        v.stages += 1
        recon = (np.einsum("ki,kim->km", op.rule.nu, vol_old)
                 + np.einsum("kf,kfm->km", op.rule.beta, cands))
        scale = np.maximum(1.0, np.abs(avg).max(axis=1))
        v.worst_identity = max(v.worst_identity, float(np.max(np.abs(recon - avg).max(axis=1) / scale)))
        raw = idp.compute_bounds(vol_old, cands, LimiterMode.IDP, raw=True)
        for psi in (PSI_DENSITY, PSI_INTERNAL_ENERGY):
            m = raw[psi]
            slack = (quasiconcave_value(psi, avg) - m) / np.maximum(1.0, np.abs(m))
            worst = float(slack.min())
            v.worst_bound_slack = min(v.worst_bound_slack, worst)
            v.violations += int(np.count_nonzero(slack < -self.cfg.slack))
        v.min_rho = min(v.min_rho, float(avg[:, 0].min()))
        v.min_rhoe = min(v.min_rhoe, float(quasiconcave_value(PSI_INTERNAL_ENERGY, avg).min()))
        bal = idp.flux_balance_residual(data.pe, data.u_minus, op.s, op.normals, op.gas)
        v.worst_balance = max(v.worst_balance, float(bal.max()))
        lam = data.pe.lambda_at_points(data.u_minus.shape[1])
        ws = idp.max_wave_speed(np.broadcast_to(data.pe.u_star[:, None, :], data.u_minus.shape),
                                data.u_minus, op.normals, op.gas, op.wave_mode, check=False)
        v.worst_domination = min(v.worst_domination, float(np.min((lam - ws) / lam)))

    def _verify_limited(self, new, bounds, avg):
        pts = self.op.check_points(new)
        for psi in (PSI_DENSITY, PSI_INTERNAL_ENERGY):
            target = np.minimum(bounds[psi], quasiconcave_value(psi, avg))
            val = quasiconcave_value(psi, pts).min(axis=1)
            slack = (val - target) / np.maximum(1.0, np.abs(target))
            if np.any(slack < -self.cfg.slack):
                self.vlog.violations += int(np.count_nonzero(slack < -self.cfg.slack))

    # --- time stepping ----------------------------------------------------------
    def ssp_rk_step(self, field: FieldState, dt: float, first: StageData | None = None):
        """One SSP-RK step with limiting after every stage; returns (field, reports)."""
        reports = []
        stage = field
        for i, (a, b) in enumerate(SSP_TABLES[self.cfg.rk_order]):
            out, rep = self.euler_stage(stage, dt, first if i == 0 else None)
            reports.append(rep)
            if a == 0.0:
                stage = out
            else:
                stage = FieldState(a * field.coeffs + b * out.coeffs, field.scheme, field.p)
        return stage, reports

    def limit_initial(self, field: FieldState) -> FieldState:
        """Positivity limiting of projected initial data."""
        if self.cfg.mode is LimiterMode.NONE:
            return field
        avg = self.op.cell_average(field)
        if not np.all(admissible_mask(avg)):
            raise InadmissibleStateError("inadmissible initial cell average")
        bounds = idp.compute_bounds(self.op.volume_values(field), None, LimiterMode.POS, self.cfg.floors)
        return idp.scaling_limiter(self.op, field, avg, bounds)[0]

    def step(self, state: RunState, t_final: float) -> None:
        first = self.analyse(state.field)
        dt = min(self.cfg.cfl * first.dt_max, t_final - state.time)
        for attempt in range(self.cfg.max_retries + 1):
            try:
                new, reports = self.ssp_rk_step(state.field, dt, first)
                break
            except (StepTooLarge, idp.IDPViolation) as err:
                if attempt == self.cfg.max_retries or self.cfg.mode is LimiterMode.NONE:
                    raise
                log.info("step %d: %s; retrying with dt/2", state.step, err)
                dt *= 0.5
        state.field = new
        state.time = t_final if dt == t_final - state.time else state.time + dt
        state.step += 1
        state.dt_history.append(dt)
        thetas = np.concatenate([r.theta for r in reports])
        iters = np.concatenate([r.iterations for r in reports])
        state.stats.append({
            "step": state.step, "time": state.time, "dt": dt,
            "activations": sum(r.activations for r in reports),
            "theta_mean": float(thetas.mean()), "theta_max": float(thetas.max()),
            "iter_mean": float(iters.mean()),
            "gate_skips": sum(r.gate_skips for r in reports),
        })

    def run(self, field: FieldState, t_final: float, max_steps: int | None = None,
            callback=None, track_totals: bool = False) -> RunState:
        state = RunState(self.limit_initial(field))
        state.verify = self.vlog
        if track_totals:
            state.totals.append(self.op.totals(state.field))
        while state.time < t_final:
            if max_steps is not None and state.step >= max_steps:
                break
            self.step(state, t_final)
            if track_totals:
                state.totals.append(self.op.totals(state.field))
            if callback is not None:
                callback(state)
        return state
