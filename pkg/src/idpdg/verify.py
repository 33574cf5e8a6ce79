"""Property suites run by ``idpdg verify``; each check yields name, value, threshold, pass flag."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature as quad
from .cases import RIEMANN_CASES, smooth_wave_exact
from .discretization import build_operator
from .idp import LimiterMode
from .mesh import BoundaryTag, QuadMeshSpec, build_quad_mesh, build_segment_mesh, verify_closure
from .physics import conserved
from .timeloop import Solver, SolverConfig


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    relation: str = "<"

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{self.name} value={self.value:.6e} threshold{self.relation}{self.threshold:.3e} {flag}"


def below(name, value, threshold) -> Check:
    value = float(value)
    return Check(name, value, threshold, bool(value < threshold), "<")


def above(name, value, threshold) -> Check:
    value = float(value)
    return Check(name, value, threshold, bool(value > threshold), ">")


def curved_mesh(n=4, periodic=False):
    return build_quad_mesh(QuadMeshSpec(n, n, distortion=0.15, degree=2,
                                        periodic_x=periodic, periodic_y=periodic))


def straight_mesh(n=4, periodic=False):
    return build_quad_mesh(QuadMeshSpec(n, n, domain=(0.0, 2.0, 0.0, 1.0), rotation=20.0,
                                        periodic_x=periodic, periodic_y=periodic))


def suite_closure():
    out = []
    for label, mesh in (("straight", straight_mesh()), ("curved", curved_mesh())):
        for scheme in ("modal_dg", "dgsem"):
            op = build_operator(mesh, scheme, 3)
            out.append(below(f"closure/{label}/{scheme}", verify_closure(op.geom).max(), 1e-12))
    return out


def average_rule_checks(op):
    """Exactness of the cell-average rule on the modal space, weight sums, eps > 0."""
    rule = op.rule
    exact = np.zeros(op.V.shape[-1])
    exact[0] = 1.0
    applied = np.einsum("ki,kin->kn", rule.nu, op.V) + np.einsum("kf,kfn->kn", rule.beta, op.Vf)
    return (np.abs(applied - exact).max(), float(rule.eps.min()),
            np.abs(rule.total() - 1.0).max())


def alpha_agreement(op):
    pts, _ = quad.tensor_rule(quad.gauss_legendre(int(round(op.V.shape[1] ** (1 / op.dim)))), op.dim)
    P, _ = quad.legendre_tensor(pts, op.p)
    Pf, _ = quad.legendre_tensor(op.geom.layout.points, op.p)
    K = op.n_elements
    a2 = quad.alpha_by_representation(np.broadcast_to(P, (K,) + P.shape),
                                      np.broadcast_to(Pf, (K,) + Pf.shape), op.geom.varpi, op.s)
    return np.abs(op.rule.alpha - a2).max()


def suite_quadrature(max_p: int = 6):
    out = []
    for label, mesh in (("straight", straight_mesh(2)), ("curved", curved_mesh(2))):
        for p in range(mesh.degree, max_p + 1):
            op = build_operator(mesh, "modal_dg", p)
            err, eps, total = average_rule_checks(op)
            out.append(below(f"quadrature/{label}/p{p}/exactness", err, 1e-11))
            out.append(above(f"quadrature/{label}/p{p}/eps", eps, 0.0))
            out.append(below(f"quadrature/{label}/p{p}/weight_sum", total, 1e-13))
            out.append(below(f"quadrature/{label}/p{p}/alpha_agreement", alpha_agreement(op), 1e-10))
    return out


def suite_freestream(steps: int = 50):
    out = []
    state = conserved(np.array(1.0), np.array([0.7, -0.4]), np.array(1.0))
    mesh = curved_mesh(6, periodic=True)
    for scheme in ("modal_dg", "dgsem"):
        op = build_operator(mesh, scheme, 3)
        field = op.constant_field(state)
        st = Solver(op, SolverConfig(mode=LimiterMode.IDP)).run(field, np.inf, max_steps=steps)
        drift = np.abs(op.volume_values(st.field) - state).max()
        out.append(below(f"freestream/{scheme}", drift, 1e-11))
    return out


def suite_conservation(steps: int = 100):
    out = []
    mesh = build_segment_mesh(0.0, 1.0, 20, BoundaryTag.PERIODIC, BoundaryTag.PERIODIC)
    for scheme in ("modal_dg", "dgsem"):
        for mode in (LimiterMode.NONE, LimiterMode.IDP):
            op = build_operator(mesh, scheme, 3)
            field = op.project(lambda y: smooth_wave_exact(y[..., 0], 0.0))
            st = Solver(op, SolverConfig(mode=mode, gate=None)).run(field, np.inf, max_steps=steps,
                                                                     track_totals=True)
            tot = np.array(st.totals)
            drift = (np.abs(tot - tot[0]) / np.abs(tot[0]).clip(1e-300)).max()
            out.append(below(f"conservation/{scheme}/{mode.value}", drift, 1e-11))
    return out


def suite_idp(n: int = 50, p: int = 2):
    out = []
    for name, case in RIEMANN_CASES.items():
        mesh = build_segment_mesh(*case.domain, n)
        for scheme in ("modal_dg", "dgsem"):
            op = build_operator(mesh, scheme, p)
            solver = Solver(op, SolverConfig(mode=LimiterMode.IDP, verify=True))
            st = solver.run(op.project(case.initial()), case.t_final)
            v = st.verify
            tag = f"idp/{name}/{scheme}"
            out.append(below(f"{tag}/violations", v.violations, 0.5))
            out.append(above(f"{tag}/bound_slack", v.worst_bound_slack, -1e-12))
            out.append(above(f"{tag}/min_rho", v.min_rho, 0.0))
            out.append(above(f"{tag}/min_rhoe", v.min_rhoe, 0.0))
            out.append(below(f"{tag}/identity", v.worst_identity, 1e-12))
            out.append(below(f"{tag}/flux_balance", v.worst_balance, 1e-10))
            out.append(above(f"{tag}/domination", v.worst_domination, -1e-14))
    return out


SUITES = {
    "closure": suite_closure,
    "quadrature": suite_quadrature,
    "freestream": suite_freestream,
    "conservation": suite_conservation,
    "idp": suite_idp,
}


def run_suite(name: str):
    if name == "all":
        return [c for fn in SUITES.values() for c in fn()]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    return SUITES[name]()
