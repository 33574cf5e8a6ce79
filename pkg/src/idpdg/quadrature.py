"""Gauss rules, orthonormal Legendre bases and boundary-inclusive cell-average rules.

A cell-average rule writes the element mean of any u in the element's
polynomial space as a convex combination of interior point values and face
traces::

    <u> = sum_i nu_i u(y_i) + sum_k beta_k u(x_k),   sum nu + sum beta = 1,

with ``nu >= 0`` and ``beta > 0``.  Modal DG obtains it by the constructive
splitting ``nu = varpi - eps * alpha``, ``beta = eps * s``; DGSEM by handing
the Lobatto boundary-node weights over to the faces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class QuadratureError(ValueError):
    pass


@dataclass(frozen=True)
class Rule1D:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    @property
    def n(self) -> int:
        return len(self.nodes)


def legendre_values(x, n: int):
    """P_0..P_n and their derivatives at ``x`` via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    P = np.zeros((n + 1,) + x.shape)
    dP = np.zeros_like(P)
    P[0] = 1.0
    if n >= 1:
        P[1] = x
        dP[1] = 1.0
    for k in range(1, n):
        P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)
        dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k]
    return P, dP


def gauss_legendre(n: int) -> Rule1D:
    """n-point Gauss-Legendre rule, exact for degree 2n-1."""
    if n < 1:
        raise QuadratureError(f"Gauss-Legendre needs n >= 1, got {n}")
    k = np.arange(1, n + 1)
    x = -np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        P, dP = legendre_values(x, n)
        dx = P[n] / dP[n]
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    P, dP = legendre_values(x, n)
    w = 2.0 / ((1.0 - x * x) * dP[n] ** 2)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return Rule1D(x, w, "legendre")


def gauss_lobatto(n: int) -> Rule1D:
    """n-point Gauss-Lobatto rule (endpoints included), exact for degree 2n-3."""
    if n < 2:
        raise QuadratureError(f"Gauss-Lobatto needs n >= 2, got {n}")
    N = n - 1
    x = -np.cos(np.pi * np.arange(n) / N)
    if N >= 2:
        xi = x[1:-1]
        for _ in range(100):
            # interior nodes are roots of P_N'; Newton with P_N'' from the Legendre ODE
            P, dP = legendre_values(xi, N)
            d2P = (2 * xi * dP[N] - N * (N + 1) * P[N]) / (1 - xi * xi)
            dx = dP[N] / d2P
            xi = xi - dx
            if np.max(np.abs(dx)) < 1e-16:
                break
        x[1:-1] = xi
    P, _ = legendre_values(x, N)
    w = 2.0 / (N * (N + 1) * P[N] ** 2)
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return Rule1D(x, w, "lobatto")


def make_rule(kind: str, n: int) -> Rule1D:
    if kind == "legendre":
        return gauss_legendre(n)
    if kind == "lobatto":
        return gauss_lobatto(n)
    raise QuadratureError(f"unknown rule {kind!r}")


def tensor_rule(rule: Rule1D, dim: int):
    """Tensor nodes (N, dim) and weights on [-1, 1]^dim; first coordinate runs fastest."""
    if dim == 1:
        return rule.nodes[:, None].copy(), rule.weights.copy()
    X, Y = np.meshgrid(rule.nodes, rule.nodes, indexing="xy")
    WX, WY = np.meshgrid(rule.weights, rule.weights, indexing="xy")
    return np.stack([X.ravel(), Y.ravel()], axis=-1), (WX * WY).ravel()


# Reference quadrilateral faces, traversed counterclockwise: (fixed axis, fixed
# value, parameter sign). Face points of a neighbour come in reverse order.
QUAD_FACES = ((1, -1.0, +1.0), (0, +1.0, +1.0), (1, +1.0, -1.0), (0, -1.0, -1.0))
QUAD_NORMALS = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])


@dataclass(frozen=True)
class FaceLayout:
    """Reference face points of one element, grouped face by face."""

    points: np.ndarray     # (Nf, dim) reference coordinates
    weights: np.ndarray    # (Nf,) reference face weights omega^f
    face: np.ndarray       # (Nf,) local face index
    n_faces: int
    n_per_face: int

    def reversed_index(self, j):
        return self.n_per_face - 1 - j


def face_layout(rule: Rule1D, dim: int) -> FaceLayout:
    if dim == 1:
        return FaceLayout(np.array([[-1.0], [1.0]]), np.ones(2), np.array([0, 1]), 2, 1)
    t = rule.nodes
    pts, wts, fid = [], [], []
    for f, (axis, value, sign) in enumerate(QUAD_FACES):
        p = np.empty((len(t), 2))
        p[:, axis] = value
        p[:, 1 - axis] = sign * t
        pts.append(p)
        wts.append(rule.weights)
        fid.append(np.full(len(t), f))
    return FaceLayout(np.concatenate(pts), np.concatenate(wts), np.concatenate(fid),
                      4, len(t))


def legendre_tensor(points, p: int):
    """Tensor Legendre polynomials normalised to unit mean square on [-1, 1]^d.

    Returns values (N, Np) and reference gradients (N, Np, d); mode ordering
    has the first index running fastest.
    """
    points = np.atleast_2d(points)
    dim = points.shape[1]
    scale = np.sqrt(2 * np.arange(p + 1) + 1.0)
    vals, ders = [], []
    for a in range(dim):
        P, dP = legendre_values(points[:, a], p)
        vals.append((P * scale[:, None]).T)
        ders.append((dP * scale[:, None]).T)
    if dim == 1:
        return vals[0], ders[0][:, :, None]
    V = np.einsum("ni,nj->nji", vals[0], vals[1]).reshape(len(points), -1)
    Vx = np.einsum("ni,nj->nji", ders[0], vals[1]).reshape(len(points), -1)
    Vy = np.einsum("ni,nj->nji", vals[0], ders[1]).reshape(len(points), -1)
    return V, np.stack([Vx, Vy], axis=-1)


def orthonormalize(Vvol, varpi):
    """Coefficients C with phi = P C^T orthonormal for sum_i varpi_i f(y_i) g(y_i).

    Batched over elements: ``Vvol`` (K, Nv, Np), ``varpi`` (K, Nv).  Equivalent
    to modified Gram-Schmidt in mode order, so phi_0 stays the constant 1.
    """
    G = np.einsum("kin,ki,kim->knm", Vvol, varpi, Vvol)
    L = np.linalg.cholesky(G)
    eye = np.broadcast_to(np.eye(G.shape[-1]), G.shape)
    return np.linalg.solve(L, eye)


def gram_defect(Vvol, varpi) -> np.ndarray:
    G = np.einsum("kin,ki,kim->knm", Vvol, varpi, Vvol)
    return np.max(np.abs(G - np.eye(G.shape[-1])), axis=(-2, -1))


def compute_alpha(Vvol, Vface, varpi, s, check: bool = True) -> np.ndarray:
    """alpha_i = varpi_i sum_j sum_k s_k phi_j(x_k) phi_j(y_i), batched over elements.

    ``Vvol``/``Vface`` hold an orthonormal basis at the volume / face points.
    """
    Vvol = np.asarray(Vvol, dtype=float)
    if Vvol.ndim == 2:
        return compute_alpha(Vvol[None], np.asarray(Vface)[None], np.asarray(varpi)[None],
                             np.asarray(s)[None], check)[0]
    if check and np.any(gram_defect(Vvol, varpi) > 1e-10):
        raise QuadratureError("quadrature not product-exact")
    g = np.einsum("kfn,kf->kn", Vface, s)
    return varpi * np.einsum("kin,kn->ki", Vvol, g)


def alpha_by_representation(Pvol, Pface, varpi, s) -> np.ndarray:
    """Independent alpha: Riesz representer of f -> sum_k s_k f(x_k) in a raw basis.

    Solves the Gram system for the representer g and returns varpi * g(y_i).
    """
    if np.ndim(Pvol) == 2:
        return alpha_by_representation(Pvol[None], Pface[None], np.asarray(varpi)[None],
                                       np.asarray(s)[None])[0]
    G = np.einsum("kin,ki,kim->knm", Pvol, varpi, Pvol)
    rhs = np.einsum("kfn,kf->kn", Pface, s)
    g = np.linalg.solve(G, rhs[..., None])[..., 0]
    return varpi * np.einsum("kin,kn->ki", Pvol, g)


@dataclass
class CellAverageRule:
    """Weights of the boundary-inclusive cell-average quadrature, per element."""

    nu: np.ndarray        # (K, Nv)
    beta: np.ndarray      # (K, Nf)
    alpha: np.ndarray | None = None
    eps: np.ndarray | None = None

    def total(self) -> np.ndarray:
        return self.nu.sum(axis=-1) + self.beta.sum(axis=-1)


NU_CLAMP = -1e-14


def build_cell_average_rule(alpha, varpi, s) -> CellAverageRule:
    """nu = varpi - eps*alpha, beta = eps*s with eps = min_{alpha_i > 0} varpi_i/alpha_i."""
    alpha = np.atleast_2d(alpha)
    varpi = np.atleast_2d(varpi)
    s = np.atleast_2d(s)
    if np.any(s <= 0.0):
        raise QuadratureError("face weights must be positive")
    pos = alpha > 0.0
    if not np.all(np.any(pos, axis=-1)):
        raise QuadratureError("no positive alpha; constants missing from the space?")
    ratio = np.where(pos, varpi / np.where(pos, alpha, 1.0), np.inf)
    eps = ratio.min(axis=-1)
    nu = varpi - eps[:, None] * alpha
    if np.any(nu < NU_CLAMP):
        raise QuadratureError(f"negative volume weight {nu.min():.3e}")
    nu = np.maximum(nu, 0.0)
    nu[np.arange(len(eps)), ratio.argmin(axis=-1)] = 0.0
    return CellAverageRule(nu=nu, beta=eps[:, None] * s, alpha=alpha, eps=eps)


def lobatto_face_nodes(p: int, dim: int) -> np.ndarray:
    """Volume-node index of every DGSEM face point (faces in FaceLayout order)."""
    if dim == 1:
        return np.array([0, p])
    q = p + 1
    j = np.arange(q)
    idx = [j, (q - 1) + q * j, (q - 1 - j) + q * (q - 1), q * (q - 1 - j)]
    return np.concatenate(idx)


def dgsem_boundary_split(J, weights, volume, p: int, dim: int,
                         layout_kind: str = "lobatto") -> CellAverageRule:
    """Cell-average rule of DGSEM: interior nodes keep their mass, boundary nodes
    hand theirs to the faces, split evenly among the faces through the node.

    ``J`` (K, Nv) volume Jacobians at the Lobatto nodes, ``weights`` (Nv,) the
    tensor Lobatto weights and ``volume`` (K,) the element measures.
    """
    if layout_kind != "lobatto":
        raise QuadratureError("DGSEM split requires collocated Gauss-Lobatto nodes")
    J = np.atleast_2d(J)
    mass = weights * J / np.asarray(volume, dtype=float).reshape(-1, 1)
    fnodes = lobatto_face_nodes(p, dim)
    mult = np.bincount(fnodes, minlength=J.shape[1])
    nu = np.where(mult == 0, mass, 0.0)
    beta = mass[:, fnodes] / mult[fnodes]
    return CellAverageRule(nu=nu, beta=beta)
