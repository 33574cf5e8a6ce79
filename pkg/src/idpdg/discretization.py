"""Spatial operators: modal DG on an orthonormal basis and split-form DGSEM.

Both operators expose the same interface so the limiter and the time loop
can treat them alike: volume values at the volume nodes, traces at the face
points, numerical fluxes shared between the two sides of every face, the
residual ``R`` and the diagonal mass ``M`` with ``dU/dt = -R / M``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import quadrature as quad
from .fluxes import FluxKind, numerical_flux
from .kernels import kg_line_sums
from .mesh import (BoundaryTag, ElementGeometry, Mesh, compute_dgsem_geometry, compute_geometry,
                   lagrange_basis, map_points)
from .physics import DEFAULT_GAS, GasModel, InadmissibleStateError, admissible_mask, dot, flux_tensor, physical_flux


class Scheme(str, enum.Enum):
    MODAL_DG = "modal_dg"
    DGSEM = "dgsem"


_TAG_CODE = {BoundaryTag.INFLOW: 0, BoundaryTag.OUTFLOW: 1,
             BoundaryTag.SLIP_WALL: 2, BoundaryTag.SYMMETRY: 3}


@dataclass
class FieldState:
    """Per-element coefficient blocks: modal coefficients or nodal values, (K, Nb, m)."""

    coeffs: np.ndarray
    scheme: Scheme
    p: int

    def copy(self) -> "FieldState":
        return FieldState(self.coeffs.copy(), self.scheme, self.p)


def ghost_state(tag, u_minus, n, inflow=None) -> np.ndarray:
    """Exterior state of a boundary face point."""
    tag = BoundaryTag(tag)
    u_minus = np.asarray(u_minus, dtype=float)
    if tag is BoundaryTag.OUTFLOW:
        return u_minus.copy()
    if tag in (BoundaryTag.SLIP_WALL, BoundaryTag.SYMMETRY):
        out = u_minus.copy()
        mn = dot(u_minus[..., 1:-1], n)
        out[..., 1:-1] -= 2.0 * mn[..., None] * n
        return out
    if tag is BoundaryTag.INFLOW:
        if inflow is None:
            raise ValueError("missing inflow data")
        return np.broadcast_to(np.asarray(inflow, dtype=float), u_minus.shape).copy()
    raise ValueError("periodic faces take the partner trace, not a ghost state")


@dataclass
class SchemeOperator:
    mesh: Mesh
    scheme: Scheme
    p: int
    geom: ElementGeometry
    rule: quad.CellAverageRule
    mass: np.ndarray              # (K, Nb)
    nbr_elem: np.ndarray          # (K, Nf) neighbour element or -1
    nbr_point: np.ndarray         # (K, Nf) matching face point of the neighbour
    bc_code: np.ndarray           # (K, Nf) boundary code, -1 inside
    owner: np.ndarray             # (K, Nf) bool: this side computes the face flux
    gas: GasModel = DEFAULT_GAS
    flux_kind: FluxKind = FluxKind.SULICIU
    wave_mode: str = "default"
    inflow: np.ndarray | None = None
    # modal tables
    V: np.ndarray | None = None       # (K, Nv, Np) basis at volume nodes
    Vf: np.ndarray | None = None      # (K, Nf, Np) basis at face points
    WG: np.ndarray | None = None      # (K, Nv, Np, d) w J grad(phi)
    WF: np.ndarray | None = None      # (K, Nf, Np) w^f J_f phi
    # DGSEM tables
    D: np.ndarray | None = None
    face_nodes: np.ndarray | None = None
    WG_T: np.ndarray | None = None    # (K, Np, Nv*d) transposed WG for matmul
    WF_T: np.ndarray | None = None    # (K, Np, Nf)
    C: np.ndarray | None = None       # (K, Np, Np) Legendre -> orthonormal basis (modal)
    nodes1d: np.ndarray | None = None  # Lobatto nodes (DGSEM)

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def n_elements(self) -> int:
        return self.mesh.n_elements

    @property
    def s(self) -> np.ndarray:
        return self.geom.s

    @property
    def normals(self) -> np.ndarray:
        return self.geom.normals

    # --- evaluation -----------------------------------------------------
    def volume_values(self, field: FieldState) -> np.ndarray:
        if self.scheme is Scheme.DGSEM:
            return field.coeffs
        return self.V @ field.coeffs

    def evaluate(self, field: FieldState, ref_points) -> tuple[np.ndarray, np.ndarray]:
        """States (K, N, m) and physical points (K, N, d) at reference points (N, d)."""
        ref_points = np.atleast_2d(np.asarray(ref_points, dtype=float))
        x, _ = map_points(self.mesh, ref_points)
        if self.scheme is Scheme.MODAL_DG:
            P, _ = quad.legendre_tensor(ref_points, self.p)
            B = np.einsum("in,kjn->kij", P, self.C)
            return B @ field.coeffs, x
        L = lagrange_basis(self.nodes1d, ref_points[:, 0])[0]
        if self.dim == 2:
            Lb = lagrange_basis(self.nodes1d, ref_points[:, 1])[0]
            L = (Lb[:, :, None] * L[:, None, :]).reshape(len(ref_points), -1)
        return np.einsum("ij,kjm->kim", L, field.coeffs), x

    def trace_values(self, field: FieldState) -> np.ndarray:
        if self.scheme is Scheme.DGSEM:
            return field.coeffs[:, self.face_nodes]
        return self.Vf @ field.coeffs

    def _index(self):
        """Flat face-point index tables, built once."""
        idx = getattr(self, "_idx", None)
        if idx is None:
            K, Nf = self.nbr_elem.shape
            flat = np.arange(K * Nf).reshape(K, Nf)
            inner = self.nbr_elem >= 0
            partner = np.where(inner, self.nbr_elem * Nf + self.nbr_point, -1)
            idx = {
                "inner": flat[inner], "partner": partner[inner],
                "bc": [(tag, flat[self.bc_code == code]) for tag, code in _TAG_CODE.items()
                       if np.any(self.bc_code == code)],
                "own": flat[self.owner], "other": flat[~self.owner],
                "other_src": partner[~self.owner],
                "normals": self.normals.reshape(K * Nf, -1),
            }
            self._idx = idx
        return idx

    def exterior(self, u_minus: np.ndarray) -> np.ndarray:
        """u+ at every face point: partner trace inside, ghost state on boundaries."""
        idx = self._index()
        m = u_minus.shape[-1]
        um = u_minus.reshape(-1, m)
        u_plus = np.empty_like(um)
        u_plus[idx["inner"]] = um[idx["partner"]]
        for tag, sel in idx["bc"]:
            u_plus[sel] = ghost_state(tag, um[sel], idx["normals"][sel], self.inflow)
        return u_plus.reshape(u_minus.shape)

    def trace_eval(self, field: FieldState):
        u_minus = self.trace_values(field)
        return u_minus, self.exterior(u_minus)

    def face_fluxes(self, u_minus, u_plus):
        """h(u-, u+, n) and its signal speed; computed once per face, negated on the partner."""
        idx = self._index()
        m = u_minus.shape[-1]
        um, up = u_minus.reshape(-1, m), u_plus.reshape(-1, m)
        own = idx["own"]
        h = np.empty_like(um)
        speed = np.empty(um.shape[0])
        h_own, sp_own = numerical_flux(self.flux_kind, um[own], up[own],
                                       idx["normals"][own], self.gas, self.wave_mode)
        h[own] = h_own
        speed[own] = sp_own
        h[idx["other"]] = -h[idx["other_src"]]
        speed[idx["other"]] = speed[idx["other_src"]]
        return h.reshape(u_minus.shape), speed.reshape(u_minus.shape[:-1])

    def cell_average(self, field: FieldState) -> np.ndarray:
        if self.scheme is Scheme.MODAL_DG:
            return field.coeffs[:, 0].copy()
        return np.einsum("kn,knm->km", self.mass, field.coeffs) / self.geom.volume[:, None]

    def cell_average_by_rule(self, field: FieldState) -> np.ndarray:
        """sum nu_i u(y_i) + sum beta_k u-(x_k)."""
        return (np.einsum("ki,kim->km", self.rule.nu, self.volume_values(field))
                + np.einsum("kf,kfm->km", self.rule.beta, self.trace_values(field)))

    def check_points(self, field: FieldState) -> np.ndarray:
        """States at volume nodes and face points (DGSEM face points are nodes)."""
        vol = self.volume_values(field)
        if self.scheme is Scheme.DGSEM:
            return vol
        return np.concatenate([vol, self.trace_values(field)], axis=1)

    # --- residual -------------------------------------------------------
    def residual(self, field: FieldState, u_minus=None, u_plus=None, h=None):
        """R per coefficient block; the update is ``dU/dt = -R / mass``."""
        if u_minus is None:
            u_minus, u_plus = self.trace_eval(field)
        if h is None:
            h, _ = self.face_fluxes(u_minus, u_plus)
        if self.scheme is Scheme.MODAL_DG:
            return self._modal_residual(field, h)
        return self._dgsem_residual(field, u_minus, h)

    def _modal_residual(self, field, h):
        uv = self.volume_values(field)
        bad = ~admissible_mask(uv)
        if np.any(bad):
            raise InadmissibleStateError(element=int(np.nonzero(bad)[0][0]))
        F = flux_tensor(uv, self.gas)                        # (K, Nv, m, d)
        K, Nv, m, d = F.shape
        Fs = F.transpose(0, 1, 3, 2).reshape(K, Nv * d, m)
        return self.WF_T @ h - self.WG_T @ Fs

    def _dgsem_residual(self, field, u_minus, h):
        U = field.coeffs
        bad = ~admissible_mask(U)
        if np.any(bad):
            raise InadmissibleStateError(element=int(np.nonzero(bad)[0][0]))
        K, Nv, m = U.shape
        n1 = self.p + 1
        D, w = self.D, self.geom.vol_weights
        metric = self.geom.metric
        g = self.gas.gamma
        if self.dim == 1:
            vol = 2.0 * kg_line_sums(U, np.ones((K, Nv, 1)), D, g)
        else:
            Ug = U.reshape(K, n1, n1, m)                       # [k, j(eta), i(xi)]
            A = metric.reshape(K, n1, n1, 2, 2)
            v1 = kg_line_sums(Ug.reshape(K * n1, n1, m), A[..., 0, :].reshape(K * n1, n1, 2), D, g)
            Ut = Ug.transpose(0, 2, 1, 3).reshape(K * n1, n1, m)
            At = A[..., 1, :].transpose(0, 2, 1, 3).reshape(K * n1, n1, 2)
            v2 = kg_line_sums(Ut, At, D, g).reshape(K, n1, n1, m).transpose(0, 2, 1, 3)
            vol = 2.0 * (v1.reshape(K, Nv, m) + v2.reshape(K, Nv, m))
        R = w[None, :, None] * vol
        fn = self.face_nodes
        wj = (self.geom.face_weights * self.geom.Jf)[..., None]
        corr = wj * (h - physical_flux(u_minus, self.normals, self.gas, check=False))
        npf = self.geom.layout.n_per_face
        for f in range(self.geom.layout.n_faces):
            sl = slice(f * npf, (f + 1) * npf)
            R[:, fn[sl]] += corr[:, sl]
        return R

    def rate(self, field: FieldState) -> np.ndarray:
        return -self.residual(field) / self.mass[..., None]

    # --- projection -----------------------------------------------------
    def project(self, func) -> FieldState:
        """Initial data: L2 projection (modal DG) or nodal interpolation (DGSEM).

        Lobatto nodes sit on element boundaries; where data jumps there, the
        node takes the one-sided value from a point pulled a hair inward.
        """
        y = self.geom.y
        u = np.asarray(func(y), dtype=float)
        if self.scheme is Scheme.DGSEM:
            centre = y.mean(axis=1, keepdims=True)
            inner = np.asarray(func(y + 1e-10 * (centre - y)), dtype=float)
            scale = np.maximum(np.abs(u), np.abs(inner)).max(axis=(0, 1))
            jump = np.any(np.abs(inner - u) > 1e-6 * np.maximum(scale, 1e-300), axis=-1)
            u = np.where(jump[..., None], inner, u)
            return FieldState(u.copy(), self.scheme, self.p)
        coeffs = np.einsum("ki,kin,kim->knm", self.geom.varpi, self.V, u)
        return FieldState(coeffs, self.scheme, self.p)

    def constant_field(self, state) -> FieldState:
        state = np.asarray(state, dtype=float)
        return self.project(lambda y: np.broadcast_to(state, y.shape[:-1] + state.shape))

    def blend_to_average(self, field: FieldState, theta, avg=None) -> FieldState:
        """(1 - theta) u + theta <u>, per element; the cell average is untouched."""
        theta = np.asarray(theta, dtype=float)[:, None, None]
        out = field.copy()
        if self.scheme is Scheme.MODAL_DG:
            out.coeffs[:, 1:] *= 1.0 - theta
        else:
            if avg is None:
                avg = self.cell_average(field)
            out.coeffs = (1.0 - theta) * field.coeffs + theta * avg[:, None, :]
        return out

    def modal_density(self, field: FieldState) -> np.ndarray:
        """Density coefficients on the element's orthonormal basis, (K, Np)."""
        if self.scheme is Scheme.MODAL_DG:
            return field.coeffs[..., 0]
        rho = field.coeffs[..., 0]
        return np.einsum("ki,kin,ki->kn", self.geom.varpi, self._nodal_basis, rho)

    @property
    def total_volume(self) -> float:
        return float(self.geom.volume.sum())

    def totals(self, field: FieldState) -> np.ndarray:
        """Domain integrals of the conserved variables."""
        return np.einsum("k,km->m", self.geom.volume, self.cell_average(field))


def _connectivity(mesh: Mesh, layout: quad.FaceLayout):
    K, Nf, npf = mesh.n_elements, len(layout.face), layout.n_per_face
    nb = mesh.neighbors()
    nbr_elem = -np.ones((K, Nf), dtype=int)
    nbr_point = -np.ones((K, Nf), dtype=int)
    bc = -np.ones((K, Nf), dtype=int)
    j = np.arange(npf)
    for f in range(layout.n_faces):
        sl = slice(f * npf, (f + 1) * npf)
        e2, f2 = nb[:, f, 0], nb[:, f, 1]
        inner = e2 >= 0
        nbr_elem[inner, sl] = e2[inner, None]
        nbr_point[inner, sl] = f2[inner, None] * npf + (npf - 1 - j)[None, :]
    for (e, f), tag in mesh.boundary.items():
        bc[e, f * npf:(f + 1) * npf] = _TAG_CODE[BoundaryTag(tag)]
    ids = np.arange(K)[:, None]
    pts = np.arange(Nf)[None, :]
    owner = (nbr_elem < 0) | (nbr_elem > ids) | ((nbr_elem == ids) & (nbr_point > pts))
    return nbr_elem, nbr_point, bc, owner


def build_operator(mesh: Mesh, scheme, p: int, gas: GasModel = DEFAULT_GAS,
                   flux_kind=FluxKind.SULICIU, wave_mode: str = "default",
                   inflow=None) -> SchemeOperator:
    scheme = Scheme(scheme)
    if p < 1:
        raise ValueError("polynomial degree must be >= 1")
    if p < mesh.degree:
        raise ValueError("polynomial degree must not be below the mapping degree")
    d = mesh.dim
    if scheme is Scheme.DGSEM:
        lob = quad.gauss_lobatto(p + 1)
        geom = compute_dgsem_geometry(mesh, lob)
        rule = quad.dgsem_boundary_split(geom.J, geom.vol_weights, geom.volume, p, d)
        mass = geom.vol_weights * geom.J
        nbr_elem, nbr_point, bc, owner = _connectivity(mesh, geom.layout)
        op = SchemeOperator(mesh, scheme, p, geom, rule, mass, nbr_elem, nbr_point, bc, owner,
                            gas, FluxKind(flux_kind), wave_mode, inflow,
                            D=quad_derivative(lob), face_nodes=quad.lobatto_face_nodes(p, d),
                            nodes1d=lob.nodes)
        pts, _ = quad.tensor_rule(lob, d)
        P, _ = quad.legendre_tensor(pts, p)
        C = quad.orthonormalize(np.broadcast_to(P, (mesh.n_elements,) + P.shape), geom.varpi)
        op._nodal_basis = np.einsum("in,kjn->kij", P, C)
        return op

    # modal DG: over-integrated Gauss-Legendre volume and face rules
    nq = p + 2 + (mesh.degree - 1) * (d > 1)
    rule_v = quad.gauss_legendre(nq)
    rule_f = quad.gauss_legendre(nq)
    geom = compute_geometry(mesh, rule_v, rule_f)
    pts, _ = quad.tensor_rule(rule_v, d)
    P, dP = quad.legendre_tensor(pts, p)
    Pf, _ = quad.legendre_tensor(geom.layout.points, p)
    K = mesh.n_elements
    C = quad.orthonormalize(np.broadcast_to(P, (K,) + P.shape), geom.varpi)
    V = np.einsum("in,kjn->kij", P, C)
    Vf = np.einsum("fn,kjn->kfj", Pf, C)
    dref = np.einsum("ina,kjn->kija", dP, C)                 # d phi / d xi_a
    grad = np.einsum("kija,kiab->kijb", dref, geom.dxi_dx)
    WG = (geom.vol_weights * geom.J)[..., None, None] * grad
    WF = (geom.face_weights * geom.Jf)[..., None] * Vf
    alpha = quad.compute_alpha(V, Vf, geom.varpi, geom.s)
    rule = quad.build_cell_average_rule(alpha, geom.varpi, geom.s)
    mass = np.repeat(geom.volume[:, None], P.shape[1], axis=1)
    nbr_elem, nbr_point, bc, owner = _connectivity(mesh, geom.layout)
    return SchemeOperator(mesh, scheme, p, geom, rule, mass, nbr_elem, nbr_point, bc, owner,
                          gas, FluxKind(flux_kind), wave_mode, inflow,
                          V=V, Vf=Vf, WG=WG, WF=WF, C=C,
                          WG_T=np.ascontiguousarray(WG.transpose(0, 2, 1, 3).reshape(K, P.shape[1], -1)),
                          WF_T=np.ascontiguousarray(WF.transpose(0, 2, 1)))


def quad_derivative(rule: quad.Rule1D) -> np.ndarray:
    from .mesh import derivative_matrix
    return derivative_matrix(rule.nodes)
