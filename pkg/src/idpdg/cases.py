"""Test-case definitions: Riemann problems, Mach-10 wedge, free stream, smooth density wave."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CaseConfig
from .discretization import FieldState, SchemeOperator, build_operator
from .fluxes import FluxKind
from .idp import Floors, LimiterMode, SmoothnessGate
from .mesh import BoundaryTag, Mesh, QuadMeshSpec, build_quad_mesh, build_segment_mesh, ramp_spec
from .physics import DEFAULT_GAS, GasModel, conserved
from .riemann import ExactRiemannSolution, shock_post_state
from .timeloop import SolverConfig


@dataclass(frozen=True)
class RiemannCase:
    """Primitive left/right states ``(rho, u, p)`` separated at ``x0``."""

    name: str
    left: tuple
    right: tuple
    x0: float
    domain: tuple = (-0.5, 0.5)
    t_final: float = 0.2

    def states(self, gas: GasModel = DEFAULT_GAS):
        uL = conserved(np.array(self.left[0]), np.array([self.left[1]]), np.array(self.left[2]), gas)
        uR = conserved(np.array(self.right[0]), np.array([self.right[1]]), np.array(self.right[2]), gas)
        return uL, uR

    def exact(self, gas: GasModel = DEFAULT_GAS) -> ExactRiemannSolution:
        return ExactRiemannSolution(*self.states(gas), gas)

    def initial(self, gas: GasModel = DEFAULT_GAS):
        uL, uR = self.states(gas)
        return lambda y: np.where((y[..., 0] < self.x0)[..., None], uL, uR)

    def exact_at(self, x, t, gas: GasModel = DEFAULT_GAS):
        """Exact conserved states at positions ``x`` and time ``t > 0``."""
        return self.exact(gas)((np.asarray(x) - self.x0) / t)


RIEMANN_CASES = {
    "sod": RiemannCase("sod", (1.0, 0.0, 1.0), (0.125, 0.0, 0.1), 0.0),
    "lax": RiemannCase("lax", (0.445, 0.698, 3.528), (0.5, 0.0, 0.571), 0.0),
    # the fast shock travels ~2.3 by t = 0.2; the domain keeps every wave inside
    "toro4": RiemannCase("toro4", (5.99924, 19.5975, 460.894), (5.99242, -6.19633, 46.0950), -0.1,
                         domain=(-0.5, 2.5)),
}

# Mach 10 wedge: gas at rest ahead of the shock, Rankine-Hugoniot state behind it
DMR_PRESHOCK = (1.4, 0.0, 1.0)
DMR_MACH = 10.0
DMR_MESH = (114, 73)
DMR_DOMAIN = (-0.5, 2.5, 0.0, 2.0)
DMR_T_FINAL = 0.2
# the flow ahead of the wedge is tangential to the bottom; a copy condition there
# lets the compression at the corner draw mass in from below, so mirror it instead
DMR_BOTTOM = BoundaryTag.SYMMETRY


def dmr_states(gas: GasModel = DEFAULT_GAS):
    """(pre-shock, post-shock) conserved 2D states."""
    rho1, _, p1 = DMR_PRESHOCK
    (rho2, u2, p2), _ = shock_post_state(rho1, p1, DMR_MACH, gas)
    pre = conserved(np.array(rho1), np.array([0.0, 0.0]), np.array(p1), gas)
    post = conserved(np.array(rho2), np.array([u2, 0.0]), np.array(p2), gas)
    return pre, post


FREESTREAM_STATE = (1.0, (0.7, -0.4), 1.0)
SMOOTH_WAVE = {"amplitude": 0.5, "velocity": 1.0, "pressure": 1.0, "t_final": 0.5}


def smooth_wave_exact(x, t, gas: GasModel = DEFAULT_GAS):
    """Density wave advected by a uniform flow on the unit period."""
    a, v, p = SMOOTH_WAVE["amplitude"], SMOOTH_WAVE["velocity"], SMOOTH_WAVE["pressure"]
    x = np.asarray(x, dtype=float)
    rho = 1.0 + a * np.sin(2.0 * np.pi * (x - v * t))
    return conserved(rho, np.full(x.shape + (1,), v), np.full(x.shape, p), gas)


@dataclass
class Setup:
    """Everything needed to run a configured case."""

    name: str
    mesh: Mesh
    op: SchemeOperator
    field: FieldState
    solver: SolverConfig
    t_final: float
    exact: object = None          # callable (x, t) -> conserved states, 1D cases only


def solver_config(cfg: CaseConfig) -> SolverConfig:
    gate = SmoothnessGate(cfg.gate_offset, cfg.gate_slope) if cfg.gate else None
    return SolverConfig(mode=LimiterMode(cfg.mode), floors=Floors(cfg.rho_min, cfg.rhoe_min), gate=gate,
                        cfl=cfg.cfl, rk_order=cfg.rk_order, tol=cfg.tol, max_iter=cfg.max_iter,
                        max_retries=cfg.max_retries, verify=cfg.verify)


def _operator(cfg: CaseConfig, mesh: Mesh, inflow=None, gas: GasModel = DEFAULT_GAS):
    return build_operator(mesh, cfg.scheme, cfg.p, gas, flux_kind=FluxKind(cfg.flux),
                          wave_mode=cfg.wave_mode, inflow=inflow)


def setup(cfg: CaseConfig, gas: GasModel = DEFAULT_GAS) -> Setup:
    """Mesh, operator, initial field and solver settings for a configured case."""
    cfg.validate()
    name = cfg.case
    if name in RIEMANN_CASES:
        case = RIEMANN_CASES[name]
        a, b = cfg.domain if cfg.domain is not None else case.domain
        mesh = build_segment_mesh(a, b, cfg.n or 100)
        op = _operator(cfg, mesh, gas=gas)
        t_final = case.t_final if cfg.t_final is None else cfg.t_final
        return Setup(name, mesh, op, op.project(case.initial(gas)), solver_config(cfg), t_final,
                     exact=lambda x, t: case.exact_at(x, t, gas))
    if name == "smooth_wave":
        a, b = cfg.domain if cfg.domain is not None else (0.0, 1.0)
        if not np.isclose(b - a, 1.0):
            raise ValueError("the smooth wave needs a domain of unit length")
        mesh = build_segment_mesh(a, b, cfg.n or 20, BoundaryTag.PERIODIC, BoundaryTag.PERIODIC)
        op = _operator(cfg, mesh, gas=gas)
        t_final = SMOOTH_WAVE["t_final"] if cfg.t_final is None else cfg.t_final
        return Setup(name, mesh, op, op.project(lambda y: smooth_wave_exact(y[..., 0], 0.0, gas)),
                     solver_config(cfg), t_final, exact=lambda x, t: smooth_wave_exact(x, t, gas))
    if name == "freestream":
        dom = cfg.domain if cfg.domain is not None else (0.0, 1.0, 0.0, 1.0)
        spec = QuadMeshSpec(cfg.nx or 8, cfg.ny or 8, domain=tuple(dom),
                            distortion=cfg.distortion, degree=cfg.mapping_degree,
                            periodic_x=True, periodic_y=True)
        mesh = build_quad_mesh(spec)
        rho, vel, p = FREESTREAM_STATE
        state = conserved(np.array(rho), np.array(vel), np.array(p), gas)
        op = _operator(cfg, mesh, gas=gas)
        t_final = 0.1 if cfg.t_final is None else cfg.t_final
        return Setup(name, mesh, op, op.constant_field(state), solver_config(cfg), t_final)
    if name == "dmr":
        nx, ny = cfg.nx or DMR_MESH[0], cfg.ny or DMR_MESH[1]
        dom = cfg.domain if cfg.domain is not None else DMR_DOMAIN
        mesh = build_quad_mesh(ramp_spec(nx, ny, domain=tuple(dom), degree=cfg.mapping_degree,
                                         bottom=DMR_BOTTOM))
        pre, post = dmr_states(gas)
        op = _operator(cfg, mesh, inflow=post, gas=gas)
        field = op.project(lambda y: np.where((y[..., 0] < 0.0)[..., None], post, pre))
        t_final = DMR_T_FINAL if cfg.t_final is None else cfg.t_final
        return Setup(name, mesh, op, field, solver_config(cfg), t_final)
    raise ValueError(f"unknown case {name!r}")
