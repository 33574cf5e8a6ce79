"""Compressible Euler system for a polytropic ideal gas.

States are plain numpy arrays whose last axis holds the conserved variables
``(rho, rho*v_1, ..., rho*v_d, rho*E)``; every function broadcasts over the
leading axes.  Normals carry ``d`` components on their last axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class InadmissibleStateError(ValueError):
    """Raised when a state leaves the admissible set (rho > 0, rho*e > 0)."""

    def __init__(self, message: str = "inadmissible state", element=None):
        super().__init__(message)
        self.element = element


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4
    cv: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


DEFAULT_GAS = GasModel()


def dim_of(u) -> int:
    return np.shape(u)[-1] - 2


def dot(a, b) -> np.ndarray:
    """Contraction over the last (short) axis; faster than np.sum for d <= 3."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = a[..., 0] * b[..., 0]
    for c in range(1, max(a.shape[-1], b.shape[-1])):
        out = out + a[..., c] * b[..., c]
    return out


def conserved(rho, velocity, pressure, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """Build conserved states from primitive ``(rho, v, p)``."""
    rho = np.asarray(rho, dtype=float)
    vel = np.asarray(velocity, dtype=float)
    if vel.ndim == rho.ndim:
        vel = vel[..., None]
    p = np.asarray(pressure, dtype=float)
    mom = rho[..., None] * vel
    energy = p / (gas.gamma - 1.0) + 0.5 * rho * dot(vel, vel)
    return np.concatenate(
        [rho[..., None], mom, np.asarray(energy)[..., None]], axis=-1
    )


def primitive(u, gas: GasModel = DEFAULT_GAS):
    """Return ``(rho, velocity, pressure)``; velocity has a trailing d axis."""
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    vel = u[..., 1:-1] / rho[..., None]
    p = pressure(u, gas)
    return rho, vel, p


def internal_energy_density(u) -> np.ndarray:
    """rho*e = rho*E - |rho v|^2 / (2 rho); evaluated without admissibility checks."""
    u = np.asarray(u, dtype=float)
    mom = u[..., 1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return u[..., -1] - 0.5 * dot(mom, mom) / u[..., 0]


def pressure(u, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    return (gas.gamma - 1.0) * internal_energy_density(u)


def admissible_mask(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    rhoe = internal_energy_density(u)
    with np.errstate(invalid="ignore"):
        return (rho > 0.0) & (rhoe > 0.0) & np.isfinite(rhoe)


def is_admissible(u) -> bool:
    """True iff every state in ``u`` has rho > 0 and rho*e > 0 (strictly)."""
    return bool(np.all(admissible_mask(u)))


def _require_admissible(u):
    if not is_admissible(u):
        raise InadmissibleStateError()


def sound_speed(u, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    return np.sqrt(gas.gamma * pressure(u, gas) / np.asarray(u)[..., 0])


def physical_flux(u, n, gas: GasModel = DEFAULT_GAS, check: bool = True) -> np.ndarray:
    """Normal flux f(u).n for states ``u`` and unit normals ``n``."""
    u = np.asarray(u, dtype=float)
    n = np.asarray(n, dtype=float)
    if check:
        _require_admissible(u)
    m = u.shape[-1]
    shape = np.broadcast_shapes(u.shape[:-1], n.shape[:-1])
    uf = np.ascontiguousarray(np.broadcast_to(u, shape + (m,))).reshape(-1, m)
    nf = np.ascontiguousarray(np.broadcast_to(n, shape + (m - 2,))).reshape(-1, m - 2)
    return kernels.normal_flux(uf, nf, float(gas.gamma)).reshape(shape + (m,))


def flux_tensor(u, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """Full flux f(u) with shape (..., m, d)."""
    u = np.asarray(u, dtype=float)
    m = u.shape[-1]
    uf = np.ascontiguousarray(u).reshape(-1, m)
    return kernels.flux_tensor(uf, float(gas.gamma)).reshape(u.shape + (m - 2,))


def fan_bounds(uL, uR, n, gas: GasModel = DEFAULT_GAS):
    """Signed speeds ``(sL, sR)`` enclosing the exact Riemann fan in direction n.

    Uses the two-rarefaction pressure, an upper bound on the exact star
    pressure for 1 < gamma <= 5/3, inside the exact shock/rarefaction edge
    speed formulas (both are monotone in the star pressure).
    """
    g = gas.gamma
    rhoL, rhoR = uL[..., 0], uR[..., 0]
    vL = dot(uL[..., 1:-1], n) / rhoL
    vR = dot(uR[..., 1:-1], n) / rhoR
    pL, pR = pressure(uL, gas), pressure(uR, gas)
    cL, cR = np.sqrt(g * pL / rhoL), np.sqrt(g * pR / rhoR)
    z = (g - 1.0) / (2.0 * g)
    num = cL + cR - 0.5 * (g - 1.0) * (vR - vL)
    den = cL / pL**z + cR / pR**z
    pstar = (np.maximum(num, 0.0) / den) ** (1.0 / z)
    fac = (g + 1.0) / (2.0 * g)
    qL = np.sqrt(1.0 + fac * np.maximum(pstar / pL - 1.0, 0.0))
    qR = np.sqrt(1.0 + fac * np.maximum(pstar / pR - 1.0, 0.0))
    return vL - cL * qL, vR + cR * qR


def max_wave_speed(uL, uR, n, gas: GasModel = DEFAULT_GAS, mode: str = "default",
                   check: bool = True) -> np.ndarray:
    """Upper estimate of the largest signal speed of the Riemann fan in direction n.

    ``mode="default"`` returns ``max(|vL.n| + cL, |vR.n| + cR)``;
    ``mode="guaranteed"`` takes the max of that and the two-rarefaction bound
    on the exact fan edges.
    """
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    n = np.asarray(n, dtype=float)
    if check:
        _require_admissible(uL)
        _require_admissible(uR)
    sL = np.abs(dot(uL[..., 1:-1], n) / uL[..., 0]) + sound_speed(uL, gas)
    sR = np.abs(dot(uR[..., 1:-1], n) / uR[..., 0]) + sound_speed(uR, gas)
    lam = np.maximum(sL, sR)
    if mode == "guaranteed":
        sl, sr = fan_bounds(uL, uR, n, gas)
        lam = np.maximum(lam, np.maximum(np.abs(sl), np.abs(sr)))
    elif mode != "default":
        raise ValueError(f"unknown wave-speed mode {mode!r}")
    return lam


def specific_entropy(u, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """s = cv * ln(p / rho**gamma)."""
    u = np.asarray(u, dtype=float)
    _require_admissible(u)
    return gas.cv * np.log(pressure(u, gas) / u[..., 0] ** gas.gamma)


PSI_DENSITY = "psi1_density"
PSI_INTERNAL_ENERGY = "psi2_internal_energy"


def quasiconcave_value(which: str, u) -> np.ndarray:
    """Evaluate the limiter constraints psi1 = rho or psi2 = rho*e.

    psi2 returns ``-inf`` wherever rho <= 0 so comparisons stay well defined
    on probe states outside the admissible set.
    """
    u = np.asarray(u, dtype=float)
    if which == PSI_DENSITY:
        return u[..., 0].copy()
    if which == PSI_INTERNAL_ENERGY:
        rhoe = internal_energy_density(u)
        return np.where(u[..., 0] > 0.0, rhoe, -np.inf)
    raise ValueError(f"unknown quasiconcave function {which!r}")
