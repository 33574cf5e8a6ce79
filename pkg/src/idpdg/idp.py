"""Invariant-domain-preserving limiting of one forward-Euler stage.

Per element the pipeline is: pseudo-equilibrium state ``u*`` and speed(s)
``lambda*`` from the face traces, the admissible time step, the candidate
states ``U_k`` whose convex hull (with the interior node values) contains the
updated cell average, the bounds ``m^psi`` they induce, and finally the
scaling limiter that pulls every check point inside the bounds while keeping
the cell average.  All routines are vectorised over elements: traces come as
``(K, Nf, m)`` arrays, per-face weights ``s`` as ``(K, Nf)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kernels

from .physics import (
    DEFAULT_GAS,
    GasModel,
    InadmissibleStateError,
    PSI_DENSITY,
    PSI_INTERNAL_ENERGY,
    admissible_mask,
    dot,
    internal_energy_density,
    max_wave_speed,
    physical_flux,
    quasiconcave_value,
)


class IDPViolation(InadmissibleStateError):
    def __init__(self, message: str = "IDP violation", element=None):
        super().__init__(message, element)


class PseudoEquilibriumError(RuntimeError):
    pass


class LimiterMode(str, enum.Enum):
    NONE = "none"
    POS = "pos"
    IDP = "idp"
    IDPLOC = "idploc"


@dataclass(frozen=True)
class Floors:
    rho_min: float = 1e-12
    rhoe_min: float = 1e-12

    def __post_init__(self):
        if not (self.rho_min > 0.0 and self.rhoe_min > 0.0):
            raise ValueError("floors must be positive")


DEFAULT_FLOORS = Floors()
PSIS = (PSI_DENSITY, PSI_INTERNAL_ENERGY)


@dataclass
class PseudoEquilibrium:
    """u* per element with its speed: (K,) in global mode, (K, Nf) in local mode."""

    u_star: np.ndarray
    lambda_star: np.ndarray
    iterations: np.ndarray
    theta: np.ndarray
    local: bool = False

    def lambda_at_points(self, n_points: int) -> np.ndarray:
        if self.local:
            return self.lambda_star
        return np.repeat(self.lambda_star[:, None], n_points, axis=1)


# --- admissibility scaling ---------------------------------------------------

def _rhoe_quadratic(u0, direction, rhoe_min):
    """Coefficients of g(t) = rho (rho e - M) along u0 - t*direction: a t^2 + b t + c."""
    r0, m0, E0 = u0[..., 0], u0[..., 1:-1], u0[..., -1]
    dr, dm, dE = direction[..., 0], direction[..., 1:-1], direction[..., -1]
    a = dr * dE - 0.5 * dot(dm, dm)
    b = -(r0 * dE + E0 * dr - dot(m0, dm) - rhoe_min * dr)
    c = r0 * E0 - 0.5 * dot(m0, m0) - rhoe_min * r0
    return a, b, c


def _first_root(a, b, c, lo, hi):
    """Smallest root of a t^2 + b t + c in [lo, hi] where the quadratic goes from
    c-sign at lo to the other sign; returns hi if none.  Vectorised."""
    a, b, c = np.broadcast_arrays(a, b, c)
    out = np.array(hi, dtype=float, copy=True) * np.ones_like(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4.0 * a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        qq = -0.5 * (b + np.where(b >= 0.0, sq, -sq))
        r1 = np.where(qq != 0.0, qq / a, np.inf)
        r2 = np.where(qq != 0.0, c / qq, np.inf)
        lin = np.where(b != 0.0, -c / b, np.inf)
    quad_ok = (a != 0.0) & (disc >= 0.0)
    r1 = np.where(quad_ok, r1, np.where(a == 0.0, lin, np.inf))
    r2 = np.where(quad_ok, r2, np.inf)
    cand = np.full(a.shape, np.inf)
    for r in (r1, r2):
        ok = np.isfinite(r) & (r >= lo) & (r <= hi)
        cand = np.where(ok & (r < cand), r, cand)
    return np.where(np.isfinite(cand), cand, out)


def admissibility_theta(u0, direction, floors: Floors = DEFAULT_FLOORS) -> np.ndarray:
    """Largest t in [0, 1] with u0 - t*direction satisfying both floors.

    Density is linear along the line; rho*e times rho is a quadratic whose
    first positive root caps t.  Vectorised over leading axes.
    """
    u0 = np.asarray(u0, dtype=float)
    direction = np.asarray(direction, dtype=float)
    rho0 = u0[..., 0]
    if np.any(rho0 < floors.rho_min) or np.any(internal_energy_density(u0) < floors.rhoe_min):
        raise InadmissibleStateError("base state violates the floors")
    dr = direction[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_rho = np.where(dr > 0.0, (rho0 - floors.rho_min) / dr, np.inf)
    t_max = np.minimum(1.0, t_rho)
    a, b, c = _rhoe_quadratic(u0, direction, floors.rhoe_min)
    t = _first_root(a, b, c, 0.0, t_max)
    t = np.minimum(t, t_max)
    # roundoff guard: step back until the end point is inside
    for _ in range(60):
        probe = u0 - t[..., None] * direction
        bad = (probe[..., 0] < floors.rho_min) | (internal_energy_density(probe) < floors.rhoe_min)
        if not np.any(bad):
            break
        t = np.where(bad, t * (1.0 - 1e-12) - 1e-300, t)
        t = np.where(bad & (t <= 0.0), 0.0, t)
    if np.any(t <= 0.0) and np.any(np.abs(direction[t <= 0.0]) > 0.0):
        raise InadmissibleStateError("admissibility scaling collapsed to zero")
    return t


# --- pseudo-equilibrium ------------------------------------------------------

def _gamma_tilde(s):
    return s / s.sum(axis=-1, keepdims=True)


def pseudo_equilibrium_global(u_minus, u_plus, s, normals, gas: GasModel = DEFAULT_GAS,
                              floors: Floors = DEFAULT_FLOORS, tol: float = 1e-12,
                              max_iter: int = 50, speed_pm=None,
                              wave_mode: str = "default") -> PseudoEquilibrium:
    """One u* and one lambda* per element from the practical fixed-point sequence.

    ``speed_pm`` (K, Nf) overrides the interface speeds |lambda|(u-, u+, n);
    by default the wave-speed estimator is used.
    """
    gt = _gamma_tilde(s)
    F = np.einsum("kf,kfm->km", gt, physical_flux(u_minus, normals, gas, check=False))
    u0 = np.einsum("kf,kfm->km", gt, u_minus)
    if speed_pm is None:
        speed_pm = max_wave_speed(u_minus, u_plus, normals, gas, wave_mode, check=False)
    s0 = max_wave_speed(u0[:, None, :], u_minus, normals, gas, wave_mode, check=False)
    # same relative margin as the growth step, so ulp-level changes of u*
    # do not force a second pass
    lam1 = np.maximum(speed_pm, s0).max(axis=1) * (1.0 + tol)
    theta = admissibility_theta(u0, F / lam1[:, None], floors)
    lam = lam1 / theta
    u_star = u0 - F / lam[:, None]
    iters = np.ones(len(lam), dtype=int)
    active = np.ones(len(lam), dtype=bool)
    for _ in range(max_iter):
        w = max_wave_speed(u_star[active, None, :], u_minus[active], normals[active], gas,
                           wave_mode, check=False).max(axis=1) / theta[active]
        grow = w > lam[active]
        if not np.any(grow):
            break
        idx = np.nonzero(active)[0]
        sel = idx[grow]
        lam[sel] = np.maximum(lam[sel], w[grow] * (1.0 + tol))
        u_star[sel] = u0[sel] - F[sel] / lam[sel, None]
        iters[sel] += 1
        active = np.zeros_like(active)
        active[sel] = True
    else:
        raise PseudoEquilibriumError(
            f"pseudo-equilibrium did not converge in {max_iter} iterations "
            f"(elements {np.nonzero(active)[0][:10].tolist()})")
    return PseudoEquilibrium(u_star, lam, iters, theta, local=False)


def pseudo_equilibrium_local(u_minus, u_plus, s, normals, gas: GasModel = DEFAULT_GAS,
                             floors: Floors = DEFAULT_FLOORS, tol: float = 1e-12,
                             max_iter: int = 50, speed_pm=None,
                             wave_mode: str = "default") -> PseudoEquilibrium:
    """u* with one speed per face point; u* is the lambda-weighted convex form."""
    gt = _gamma_tilde(s)
    f = physical_flux(u_minus, normals, gas, check=False)
    G = np.einsum("kf,kfm->km", gt, f)
    u0 = np.einsum("kf,kfm->km", gt, u_minus)
    if speed_pm is None:
        speed_pm = max_wave_speed(u_minus, u_plus, normals, gas, wave_mode, check=False)
    s0 = max_wave_speed(u0[:, None, :], u_minus, normals, gas, wave_mode, check=False)
    lam1 = np.maximum(speed_pm, s0)
    glam = np.einsum("kf,kf->k", gt, lam1)
    base = np.einsum("kf,kfm->km", gt * lam1, u_minus) / glam[:, None]
    theta = admissibility_theta(base, G / glam[:, None], floors)
    lam = lam1 / theta[:, None]

    def star(rows):
        gl = gt[rows] * lam[rows]
        return (np.einsum("kf,kfm->km", gl, u_minus[rows]) - G[rows]) / gl.sum(axis=1)[:, None]

    all_rows = np.arange(len(theta))
    u_star = star(all_rows)
    iters = np.ones(len(theta), dtype=int)
    active = all_rows
    for _ in range(max_iter):
        w = max_wave_speed(u_star[active, None, :], u_minus[active], normals[active], gas,
                           wave_mode, check=False) / theta[active, None]
        grow = w > lam[active]
        rows = np.any(grow, axis=1)
        if not np.any(rows):
            break
        sel = active[rows]
        lam[sel] = np.where(grow[rows], np.maximum(lam[sel], w[rows] * (1.0 + tol)), lam[sel])
        u_star[sel] = star(sel)
        iters[sel] += 1
        active = sel
    else:
        raise PseudoEquilibriumError(
            f"local pseudo-equilibrium did not converge in {max_iter} iterations")
    if not np.all(admissible_mask(u_star)):
        raise InadmissibleStateError("pseudo-equilibrium left the admissible set")
    return PseudoEquilibrium(u_star, lam, iters, theta, local=True)


def flux_balance_residual(pe: PseudoEquilibrium, u_minus, s, normals,
                          gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """||sum_k s_k h_lambda*(u*, u-_k, n_k)|| normalised by S lambda* max||u-||."""
    lam = pe.lambda_at_points(u_minus.shape[1])
    us = np.broadcast_to(pe.u_star[:, None, :], u_minus.shape)
    h = rusanov(us, u_minus, normals, lam, gas)
    res = np.linalg.norm(np.einsum("kf,kfm->km", s, h), axis=-1)
    scale = s.sum(axis=1) * lam.max(axis=1) * np.abs(u_minus).max(axis=(1, 2))
    return res / scale


def rusanov(uL, uR, n, lam, gas: GasModel = DEFAULT_GAS):
    fL = physical_flux(uL, n, gas, check=False)
    fR = physical_flux(uR, n, gas, check=False)
    return 0.5 * (fL + fR) - 0.5 * lam[..., None] * (uR - uL)


# --- time step, candidates, bounds -------------------------------------------

def compute_time_step(pe: PseudoEquilibrium, speed_pm, s, beta,
                      cfl_fraction: float = 1.0) -> float:
    """cfl * 1/2 / max_k (s_k/beta_k) max(lambda*, |lambda|(u-, u+, n_k))."""
    if np.size(s) == 0:
        raise ValueError("empty mesh")
    if not 0.0 < cfl_fraction <= 1.0:
        raise ValueError("cfl_fraction must lie in (0, 1]")
    lam = np.maximum(pe.lambda_at_points(s.shape[1]), speed_pm)
    rate = np.max(s / beta * lam)
    return cfl_fraction * 0.5 / rate


def element_time_steps(pe: PseudoEquilibrium, speed_pm, s, beta) -> np.ndarray:
    lam = np.maximum(pe.lambda_at_points(s.shape[1]), speed_pm)
    return 0.5 / np.max(s / beta * lam, axis=1)


def candidate_updates(u_minus, h, pe: PseudoEquilibrium, s, beta, normals, dt,
                      gas: GasModel = DEFAULT_GAS, check: bool = True) -> np.ndarray:
    """U_k = u-_k - (dt s_k / beta_k) (h(u-, u+, n_k) - h_lambda*(u*, u-_k, n_k))."""
    lam = pe.lambda_at_points(u_minus.shape[1])
    us = np.broadcast_to(pe.u_star[:, None, :], u_minus.shape)
    hstar = rusanov(us, u_minus, normals, lam, gas)
    U = u_minus - (dt * s / beta)[..., None] * (h - hstar)
    if check:
        bad = ~admissible_mask(U)
        if np.any(bad):
            raise IDPViolation(element=int(np.nonzero(bad)[0][0]))
    return U


@dataclass
class BoundsSet:
    """Lower bounds per element for each tracked psi, (K,) arrays keyed by psi name."""

    lower: dict
    candidates: np.ndarray | None = None

    def __getitem__(self, which):
        return self.lower[which]


def compute_bounds(volume_states, candidates, mode: LimiterMode,
                   floors: Floors = DEFAULT_FLOORS, raw: bool = False) -> BoundsSet:
    """m^psi = min over volume-node states and candidate states, floors underneath.

    POS mode returns the floors only.  ``raw=True`` skips the floors (used to
    verify the convex-hull inequality itself).
    """
    mode = LimiterMode(mode)
    K = volume_states.shape[0]
    floor = {PSI_DENSITY: floors.rho_min, PSI_INTERNAL_ENERGY: floors.rhoe_min}
    lower = {}
    for psi in PSIS:
        if mode in (LimiterMode.POS, LimiterMode.NONE):
            lower[psi] = np.full(K, floor[psi])
            continue
        m = np.minimum(quasiconcave_value(psi, volume_states).min(axis=1),
                       quasiconcave_value(psi, candidates).min(axis=1))
        lower[psi] = m if raw else np.maximum(m, floor[psi])
    return BoundsSet(lower, candidates)


# --- scaling limiter -----------------------------------------------------------

_ROUNDOFF_ULPS = 64.0


def limiter_theta(points, avg, bounds: BoundsSet) -> np.ndarray:
    """Per-element minimal theta in [0, 1] so that every check point obeys the bounds.

    ``points`` (K, Nz, m) are check-point states, ``avg`` (K, m) the cell averages.
    Bounds above psi(avg) are lowered to psi(avg) (the caller verifies them).
    """
    # blended states are re-evaluated with different rounding; aim a few ulps high
    eps = _ROUNDOFF_ULPS * np.finfo(float).eps
    r_scale = np.maximum(np.abs(points[..., 0]).max(axis=1), np.abs(avg[:, 0]))
    e_scale = np.maximum(np.abs(points[..., -1]).max(axis=1), np.abs(avg[:, -1]))
    b1 = np.minimum(bounds[PSI_DENSITY] + eps * r_scale, avg[:, 0])
    b2 = np.minimum(bounds[PSI_INTERNAL_ENERGY] + eps * e_scale, internal_energy_density(avg))
    return kernels.limiter_theta(np.ascontiguousarray(points), np.ascontiguousarray(avg),
                                 np.ascontiguousarray(b1), np.ascontiguousarray(b2))


@dataclass
class LimiterReport:
    """Diagnostics of one limited stage."""

    theta: np.ndarray
    activations: int
    dt_bound: np.ndarray | None = None
    iterations: np.ndarray | None = None
    bound_slack: dict = field(default_factory=dict)
    gate_skips: int = 0

    @property
    def theta_mean(self) -> float:
        return float(self.theta.mean()) if self.theta.size else 0.0

    @property
    def theta_max(self) -> float:
        return float(self.theta.max()) if self.theta.size else 0.0


def scaling_limiter(op, field, avg, bounds: BoundsSet):
    """Blend every element toward its cell average until all check points obey the bounds."""
    theta = limiter_theta(op.check_points(field), avg, bounds)
    if not np.any(theta > 0.0):
        return field, theta
    out = op.blend_to_average(field, theta, avg)
    bad = ~np.all(admissible_mask(op.check_points(out)), axis=1)
    if np.any(bad):
        # last resort: collapse the element to its (admissible) average
        theta = np.where(bad, 1.0, theta)
        out = op.blend_to_average(field, theta, avg)
    return out, theta


# --- smoothness gate -----------------------------------------------------------

@dataclass(frozen=True)
class SmoothnessGate:
    """Persson-Peraire indicator on density: log10 of the top-mode energy fraction.

    An element is considered smooth when the indicator is below
    ``offset - slope * log10(p)``.
    """

    offset: float = -2.5
    slope: float = 4.0

    def threshold(self, p: int) -> float:
        return self.offset - self.slope * np.log10(p)


def top_mode_mask(p: int, dim: int) -> np.ndarray:
    idx = np.arange(p + 1)
    if dim == 1:
        return idx == p
    I, J = np.meshgrid(idx, idx, indexing="xy")
    return (np.maximum(I, J) == p).ravel()


def smoothness_indicator(modal_rho, p: int, dim: int) -> np.ndarray:
    top = top_mode_mask(p, dim)
    c2 = modal_rho * modal_rho
    total = c2.sum(axis=1)
    with np.errstate(divide="ignore"):
        return np.log10(np.maximum(c2[:, top].sum(axis=1), 1e-300) / total)


def smoothness_gate(op, field, gate: SmoothnessGate = SmoothnessGate()) -> np.ndarray:
    """True where the element is smooth enough to skip the IDP bounds."""
    ind = smoothness_indicator(op.modal_density(field), op.p, op.dim)
    return ind < gate.threshold(op.p)
