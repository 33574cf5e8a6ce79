"""Meshes of segments and (possibly curved) quadrilaterals, and their metric terms.

Quadrilaterals are mapped from [-1, 1]^2 by Lagrange interpolation through
``(q+1)^2`` equispaced control nodes (``q`` the mapping degree, 1 or 2), stored
lexicographically with the xi index running fastest.  Local faces are
numbered bottom, right, top, left and traversed counterclockwise; segments
have faces left (0) and right (1).
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .quadrature import QUAD_FACES, FaceLayout, Rule1D, face_layout, tensor_rule


class MeshError(ValueError):
    pass


class BoundaryTag(str, enum.Enum):
    INFLOW = "Inflow"
    OUTFLOW = "Outflow"
    SLIP_WALL = "SlipWall"
    SYMMETRY = "Symmetry"
    PERIODIC = "Periodic"


@dataclass
class Mesh:
    dim: int
    degree: int
    nodes: np.ndarray                     # (Nn, dim)
    elements: np.ndarray                  # (K, (degree+1)**dim) control-node ids
    boundary: dict = field(default_factory=dict)   # (elem, face) -> BoundaryTag
    periodic: list = field(default_factory=list)   # [((e, f), (e2, f2)), ...]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_faces(self) -> int:
        return 2 * self.dim

    def control_points(self) -> np.ndarray:
        """Element control nodes, (K, q+1, dim) in 1D or (K, q+1, q+1, dim) in 2D."""
        q1 = self.degree + 1
        X = self.nodes[self.elements]
        if self.dim == 1:
            return X
        return X.reshape(len(self.elements), q1, q1, 2)

    def corner_ids(self) -> np.ndarray:
        q = self.degree
        if self.dim == 1:
            return self.elements[:, [0, q]]
        q1 = q + 1
        return self.elements[:, [0, q, q + q1 * q, q1 * q]]

    def face_vertices(self, e: int, f: int) -> tuple:
        c = self.corner_ids()[e]
        if self.dim == 1:
            return (int(c[f]),)
        return (int(c[f]), int(c[(f + 1) % 4]))

    def neighbors(self) -> np.ndarray:
        """(K, n_faces, 2) array: neighbour (elem, face), or (-1, -1) on boundaries."""
        K, nf = self.n_elements, self.n_faces
        out = -np.ones((K, nf, 2), dtype=int)
        seen = {}
        for e in range(K):
            for f in range(nf):
                key = tuple(sorted(self.face_vertices(e, f)))
                if key in seen:
                    e2, f2 = seen.pop(key)
                    out[e, f] = (e2, f2)
                    out[e2, f2] = (e, f)
                else:
                    seen[key] = (e, f)
        for (e, f), (e2, f2) in self.periodic:
            out[e, f] = (e2, f2)
            out[e2, f2] = (e, f)
            seen.pop(tuple(sorted(self.face_vertices(e, f))), None)
            seen.pop(tuple(sorted(self.face_vertices(e2, f2))), None)
        missing = [ef for ef in seen.values() if ef not in self.boundary]
        if missing:
            raise MeshError(f"untagged boundary faces: {missing[:5]}")
        return out


def build_segment_mesh(a: float, b: float, n: int,
                       left: BoundaryTag = BoundaryTag.OUTFLOW,
                       right: BoundaryTag = BoundaryTag.OUTFLOW) -> Mesh:
    """Uniform partition of [a, b] into ``n`` segments."""
    if n < 1:
        raise MeshError("element count must be >= 1")
    if not a < b:
        raise MeshError("need a < b")
    nodes = np.linspace(a, b, n + 1)[:, None]
    elements = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
    mesh = Mesh(1, 1, nodes, elements)
    left, right = BoundaryTag(left), BoundaryTag(right)
    if (left is BoundaryTag.PERIODIC) != (right is BoundaryTag.PERIODIC):
        raise MeshError("periodicity must be set on both ends")
    if left is BoundaryTag.PERIODIC:
        mesh.periodic.append(((n - 1, 1), (0, 0)))
    else:
        mesh.boundary[(0, 0)] = left
        mesh.boundary[(n - 1, 1)] = right
    return mesh


@dataclass
class QuadMeshSpec:
    nx: int
    ny: int
    domain: tuple = (0.0, 1.0, 0.0, 1.0)   # (x0, x1, y0, y1)
    distortion: float = 0.0
    degree: int = 1
    ramp: bool = False
    ramp_angle: float = 30.0
    tags: dict = field(default_factory=lambda: {
        "bottom": BoundaryTag.OUTFLOW, "right": BoundaryTag.OUTFLOW,
        "top": BoundaryTag.OUTFLOW, "left": BoundaryTag.OUTFLOW})
    rotation: float = 0.0                  # degrees, about the origin
    periodic_x: bool = False
    periodic_y: bool = False


def _ramp_map(s, t, spec: QuadMeshSpec):
    x0, x1, y0, y1 = spec.domain
    x = x0 + s * (x1 - x0)
    ybot = y0 + np.maximum(x, 0.0) * math.tan(math.radians(spec.ramp_angle))
    return x, ybot + t * (y1 - ybot)


def build_quad_mesh(spec: QuadMeshSpec) -> Mesh:
    """Structured quadrilateral mesh, optionally distorted, curved or ramp-fitted.

    The distortion moves every control node by
    ``a * (Lx, Ly) * sin(2 pi s) sin(2 pi t) / (2 pi)`` in logical coordinates
    (s, t) in [0, 1]^2, so boundaries stay straight; with ``degree=2`` edge
    midpoints move too and elements become curved.
    """
    nx, ny, q = spec.nx, spec.ny, spec.degree
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be >= 1")
    if q not in (1, 2):
        raise MeshError("mapping degree must be 1 or 2")
    s = np.linspace(0.0, 1.0, q * nx + 1)
    t = np.linspace(0.0, 1.0, q * ny + 1)
    S, T = np.meshgrid(s, t, indexing="xy")
    x0, x1, y0, y1 = spec.domain
    if spec.ramp:
        if x0 >= 0.0 or x1 <= 0.0:
            raise MeshError("ramp domain must straddle x = 0")
        # put the wedge corner on a grid line
        icorner = round(-x0 / (x1 - x0) * nx)
        if not math.isclose(icorner / nx, -x0 / (x1 - x0), rel_tol=0, abs_tol=1e-12):
            raise MeshError("ramp corner x = 0 must fall on an element boundary")
        X, Y = _ramp_map(S, T, spec)
    else:
        X = x0 + S * (x1 - x0)
        Y = y0 + T * (y1 - y0)
        if spec.distortion:
            bump = spec.distortion * np.sin(2 * np.pi * S) * np.sin(2 * np.pi * T) / (2 * np.pi)
            X = X + bump * (x1 - x0)
            Y = Y - bump * (y1 - y0)
    if spec.rotation:
        c, sn = math.cos(math.radians(spec.rotation)), math.sin(math.radians(spec.rotation))
        X, Y = c * X - sn * Y, sn * X + c * Y
    nodes = np.stack([X.ravel(), Y.ravel()], axis=-1)
    ncol = q * nx + 1
    elems = []
    for j in range(ny):
        for i in range(nx):
            ids = [(q * j + b) * ncol + (q * i + a) for b in range(q + 1) for a in range(q + 1)]
            elems.append(ids)
    mesh = Mesh(2, q, nodes, np.array(elems, dtype=int))

    def eid(i, j):
        return j * nx + i

    if spec.periodic_x:
        mesh.periodic += [((eid(nx - 1, j), 1), (eid(0, j), 3)) for j in range(ny)]
    if spec.periodic_y:
        mesh.periodic += [((eid(i, ny - 1), 2), (eid(i, 0), 0)) for i in range(nx)]
    tags = {k: BoundaryTag(v) for k, v in spec.tags.items()}
    for i in range(nx):
        if not spec.periodic_y:
            if spec.ramp:
                xc = x0 + (i + 0.5) / nx * (x1 - x0)
                mesh.boundary[(eid(i, 0), 0)] = (
                    BoundaryTag.SLIP_WALL if xc > 0.0 else tags["bottom"])
            else:
                mesh.boundary[(eid(i, 0), 0)] = tags["bottom"]
            mesh.boundary[(eid(i, ny - 1), 2)] = tags["top"]
    for j in range(ny):
        if not spec.periodic_x:
            mesh.boundary[(eid(0, j), 3)] = tags["left"]
            mesh.boundary[(eid(nx - 1, j), 1)] = tags["right"]
    _check_jacobians(mesh)
    return mesh


def ramp_spec(nx: int, ny: int, domain=(-0.5, 2.5, 0.0, 2.0), angle: float = 30.0,
              degree: int = 1, bottom: BoundaryTag = BoundaryTag.OUTFLOW) -> QuadMeshSpec:
    """Mesh spec for the Mach-10 wedge problem: inflow left, ``bottom`` ahead of
    the wedge, outflow on the right, slip wall along the wedge, symmetry on top."""
    return QuadMeshSpec(
        nx, ny, domain=domain, degree=degree, ramp=True, ramp_angle=angle,
        tags={"bottom": bottom, "right": BoundaryTag.OUTFLOW,
              "top": BoundaryTag.SYMMETRY, "left": BoundaryTag.INFLOW})


def _check_jacobians(mesh: Mesh):
    pts, _ = tensor_rule(Rule1D(np.linspace(-1, 1, 5), np.ones(5), "equi"), mesh.dim)
    _, jac = map_points(mesh, pts)
    det = jac[..., 0, 0] if mesh.dim == 1 else np.linalg.det(jac)
    bad = np.where(np.any(det <= 0.0, axis=1))[0]
    if len(bad):
        raise MeshError(f"inverted elements: {bad[:20].tolist()}")


# --- mapping ----------------------------------------------------------------

def lagrange_basis(nodes, x):
    """Values (N, n) and derivatives (N, n) of the Lagrange basis on ``nodes`` at ``x``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    L = np.ones((len(x), n))
    dL = np.zeros((len(x), n))
    for j in range(n):
        for m in range(n):
            if m == j:
                continue
            term = np.ones(len(x)) / (nodes[j] - nodes[m])
            for l in range(n):
                if l != j and l != m:
                    term = term * (x - nodes[l]) / (nodes[j] - nodes[l])
            dL[:, j] += term
            L[:, j] *= (x - nodes[m]) / (nodes[j] - nodes[m])
    return L, dL


def map_points(mesh: Mesh, ref_points):
    """Physical points (K, N, d) and Jacobian matrices dx/dxi (K, N, d, d)."""
    ref_points = np.atleast_2d(ref_points)
    ctrl = np.linspace(-1.0, 1.0, mesh.degree + 1)
    X = mesh.control_points()
    if mesh.dim == 1:
        L, dL = lagrange_basis(ctrl, ref_points[:, 0])
        x = np.einsum("na,kad->knd", L, X)
        dx = np.einsum("na,kad->knd", dL, X)
        return x, dx[..., None]
    La, dLa = lagrange_basis(ctrl, ref_points[:, 0])
    Lb, dLb = lagrange_basis(ctrl, ref_points[:, 1])
    x = np.einsum("na,nb,kbad->knd", La, Lb, X)
    dxi = np.einsum("na,nb,kbad->knd", dLa, Lb, X)
    deta = np.einsum("na,nb,kbad->knd", La, dLb, X)
    return x, np.stack([dxi, deta], axis=-1)


@dataclass
class ElementGeometry:
    """Metric data of all elements for one (volume rule, face layout) pair."""

    y: np.ndarray            # (K, Nv, d) volume points
    J: np.ndarray            # (K, Nv) volume Jacobians
    vol_weights: np.ndarray  # (Nv,) reference volume weights
    volume: np.ndarray       # (K,)
    varpi: np.ndarray        # (K, Nv) normalised volume weights, sum to 1
    dxi_dx: np.ndarray       # (K, Nv, d, d) inverse Jacobian d xi_a / d x_b
    x: np.ndarray            # (K, Nf, d) face points
    normals: np.ndarray      # (K, Nf, d) outward unit normals
    Jf: np.ndarray           # (K, Nf)
    face_weights: np.ndarray # (Nf,)
    s: np.ndarray            # (K, Nf) omega^f J_f / |kappa|
    layout: FaceLayout
    metric: np.ndarray | None = None   # (K, Nv, d, d): metric[..., a, :] = J grad xi_a

    @property
    def surface(self) -> np.ndarray:
        return self.s.sum(axis=-1)


def _face_normals(mesh: Mesh, layout: FaceLayout, jac_f):
    if mesh.dim == 1:
        n = np.where(layout.face == 0, -1.0, 1.0)
        K = jac_f.shape[0]
        return np.broadcast_to(n[None, :, None], (K, len(n), 1)).copy(), np.ones((K, len(n)))
    tangents = np.empty(jac_f.shape[:-1])
    for f, (axis, _, sign) in enumerate(QUAD_FACES):
        sel = layout.face == f
        # parameter runs along the free axis with the given sign
        tangents[:, sel] = sign * jac_f[..., 1 - axis][:, sel]
    Jf = np.linalg.norm(tangents, axis=-1)
    n = np.stack([tangents[..., 1], -tangents[..., 0]], axis=-1) / Jf[..., None]
    return n, Jf


def compute_geometry(mesh: Mesh, volume_rule: Rule1D, surface_rule: Rule1D) -> ElementGeometry:
    """Metric terms with analytic mapping derivatives at the quadrature points."""
    pts, wts = tensor_rule(volume_rule, mesh.dim)
    y, jac = map_points(mesh, pts)
    if mesh.dim == 1:
        J = jac[..., 0, 0]
        inv = 1.0 / jac
    else:
        J = np.linalg.det(jac)
        inv = np.linalg.inv(jac)
    if np.any(J <= 0.0):
        raise MeshError("nonpositive Jacobian")
    layout = face_layout(surface_rule, mesh.dim)
    x, jac_f = map_points(mesh, layout.points)
    normals, Jf = _face_normals(mesh, layout, jac_f)
    volume = J @ wts
    return ElementGeometry(
        y=y, J=J, vol_weights=wts, volume=volume, varpi=wts * J / volume[:, None],
        dxi_dx=inv, x=x, normals=normals, Jf=Jf, face_weights=layout.weights,
        s=layout.weights * Jf / volume[:, None], layout=layout)


def derivative_matrix(nodes) -> np.ndarray:
    """D_ij = l_j'(zeta_i) for the Lagrange basis on ``nodes``."""
    _, dL = lagrange_basis(nodes, nodes)
    return dL


def compute_dgsem_geometry(mesh: Mesh, lobatto: Rule1D) -> ElementGeometry:
    """Collocated Lobatto geometry with metric terms from the discrete derivative.

    The contravariant vectors J grad xi_a are built in cross-derivative form
    from nodal coordinates differentiated by D, which makes the discrete metric
    identities hold exactly; face normals and J_f reuse the same terms.
    """
    pts, wts = tensor_rule(lobatto, mesh.dim)
    y, _ = map_points(mesh, pts)
    D = derivative_matrix(lobatto.nodes)
    K, n1 = mesh.n_elements, lobatto.n
    layout = face_layout(lobatto, mesh.dim)
    if mesh.dim == 1:
        xx = y[..., 0]
        J = xx @ D.T
        metric = np.ones((K, n1, 1, 1))
        inv = (1.0 / J)[..., None, None]
        normals = np.broadcast_to(np.array([[-1.0], [1.0]]), (K, 2, 1)).copy()
        Jf = np.ones((K, 2))
    else:
        g = y.reshape(K, n1, n1, 2)              # [k, j(eta), i(xi), comp]
        d_xi = np.einsum("il,kjlc->kjic", D, g)
        d_eta = np.einsum("jl,klic->kjic", D, g)
        d_xi = d_xi.reshape(K, -1, 2)
        d_eta = d_eta.reshape(K, -1, 2)
        J = d_xi[..., 0] * d_eta[..., 1] - d_eta[..., 0] * d_xi[..., 1]
        a1 = np.stack([d_eta[..., 1], -d_eta[..., 0]], axis=-1)    # J grad xi
        a2 = np.stack([-d_xi[..., 1], d_xi[..., 0]], axis=-1)      # J grad eta
        metric = np.stack([a1, a2], axis=-2)
        inv = metric / J[..., None, None]
        from .quadrature import lobatto_face_nodes
        fn = lobatto_face_nodes(lobatto.n - 1, 2)
        sign = np.array([-1.0, 1.0, 1.0, -1.0])[layout.face]
        axis = np.array([1, 0, 1, 0])[layout.face]
        vec = sign[None, :, None] * metric[:, fn, :, :][:, np.arange(len(fn)), axis, :]
        Jf = np.linalg.norm(vec, axis=-1)
        normals = vec / Jf[..., None]
    if np.any(J <= 0.0):
        raise MeshError("nonpositive Jacobian")
    x, _ = map_points(mesh, layout.points)
    volume = J @ wts
    return ElementGeometry(
        y=y, J=J, vol_weights=wts, volume=volume, varpi=wts * J / volume[:, None],
        dxi_dx=inv, x=x, normals=normals, Jf=Jf, face_weights=layout.weights,
        s=layout.weights * Jf / volume[:, None], layout=layout, metric=metric)


def verify_closure(geom: ElementGeometry) -> np.ndarray:
    """Per-element norm of sum_k s_k n_k (zero for a closed discrete contour)."""
    return np.linalg.norm(np.einsum("kf,kfd->kd", geom.s, geom.normals), axis=-1)


# --- text format --------------------------------------------------------------

def write_mesh(mesh: Mesh, path=None) -> str:
    """Serialise to the line-oriented NODES / ELEMS / BOUNDARY format."""
    out = io.StringIO()
    out.write(f"DIM {mesh.dim} DEGREE {mesh.degree}\n")
    out.write(f"NODES {len(mesh.nodes)}\n")
    for i, p in enumerate(mesh.nodes):
        out.write(f"{i} " + " ".join(repr(float(c)) for c in p) + "\n")
    out.write(f"ELEMS {mesh.n_elements}\n")
    for e, ids in enumerate(mesh.elements):
        out.write(f"{e} " + " ".join(str(int(i)) for i in ids) + "\n")
    entries = sorted(mesh.boundary.items())
    out.write(f"BOUNDARY {len(entries) + len(mesh.periodic)}\n")
    for (e, f), tag in entries:
        out.write(f"{e} {f} {BoundaryTag(tag).value}\n")
    for (e, f), (e2, f2) in mesh.periodic:
        out.write(f"{e} {f} Periodic {e2} {f2}\n")
    text = out.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_mesh(source) -> Mesh:
    """Parse the text format from a path or a string holding its contents."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    else:
        text = source
    lines = iter(text.splitlines())
    head = next(lines).split()
    if head[0] != "DIM":
        raise MeshError("mesh file must start with DIM")
    dim, degree = int(head[1]), int(head[3])

    def section(name):
        words = next(lines).split()
        if words[0] != name:
            raise MeshError(f"expected section {name}, found {words[0]}")
        return [next(lines).split() for _ in range(int(words[1]))]

    nodes = np.array([[float(c) for c in w[1:]] for w in section("NODES")]).reshape(-1, dim)
    elements = np.array([[int(c) for c in w[1:]] for w in section("ELEMS")], dtype=int)
    mesh = Mesh(dim, degree, nodes, elements)
    for w in section("BOUNDARY"):
        e, f, tag = int(w[0]), int(w[1]), BoundaryTag(w[2])
        if tag is BoundaryTag.PERIODIC:
            mesh.periodic.append(((e, f), (int(w[3]), int(w[4]))))
        else:
            mesh.boundary[(e, f)] = tag
    _check_jacobians(mesh)
    return mesh
