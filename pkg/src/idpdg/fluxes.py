"""Two-point numerical fluxes for the Euler equations.

Interface fluxes (Rusanov, HLL, Suliciu relaxation) are consistent and
conservative, ``h(u, u, n) = f(u).n`` and ``h(uL, uR, n) = -h(uR, uL, -n)``.
The Kennedy-Gruber flux is the symmetric split-form volume flux used by
DGSEM.
"""

from __future__ import annotations

import enum

import numpy as np

from . import kernels
from .physics import (
    DEFAULT_GAS,
    GasModel,
    InadmissibleStateError,
    dot,
    fan_bounds,
    is_admissible,
    max_wave_speed,
    physical_flux,
    pressure,
)

#: When True, Rusanov callers are checked against the wave-speed estimate.
DEBUG_CHECKS = False


class FluxKind(str, enum.Enum):
    RUSANOV = "rusanov"
    HLL = "hll"
    SULICIU = "suliciu"


_KIND_CODE = {FluxKind.RUSANOV: kernels.RUSANOV, FluxKind.HLL: kernels.HLL,
              FluxKind.SULICIU: kernels.SULICIU}


class VolumeFluxKind(str, enum.Enum):
    KENNEDY_GRUBER = "kennedy_gruber"


def rusanov_flux(uL, uR, n, lam, gas: GasModel = DEFAULT_GAS, fL=None, fR=None):
    """Local Lax-Friedrichs flux ``(f(uL).n + f(uR).n)/2 - lam/2 (uR - uL)``.

    ``fL``/``fR`` may pass precomputed normal fluxes.
    """
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if DEBUG_CHECKS:
        bound = max_wave_speed(uL, uR, n, gas)
        if np.any(lam < bound * (1.0 - 1e-12)):
            raise ValueError("Rusanov speed below the wave-speed estimate")
    if fL is None:
        fL = physical_flux(uL, n, gas, check=False)
    if fR is None:
        fR = physical_flux(uR, n, gas, check=False)
    return 0.5 * (fL + fR) - 0.5 * lam[..., None] * (uR - uL)


def hll_middle_state(uL, uR, n, gas: GasModel = DEFAULT_GAS):
    """Intermediate HLL state and its bounding speeds ``(u_hll, sL, sR)``."""
    sL, sR = fan_bounds(uL, uR, n, gas)
    fL = physical_flux(uL, n, gas, check=False)
    fR = physical_flux(uR, n, gas, check=False)
    um = (sR[..., None] * uR - sL[..., None] * uL - (fR - fL)) / (sR - sL)[..., None]
    return um, sL, sR


def numerical_flux(kind, uL, uR, n, gas: GasModel = DEFAULT_GAS,
                   wave_mode: str = "default"):
    """Interface flux and the signal speed bounding its approximate Riemann fan.

    The speed is what the flux needs for its half-CFL invariant-domain
    property; it is never below the requested wave-speed estimate.
    """
    kind = FluxKind(kind)
    if wave_mode not in ("default", "guaranteed"):
        raise ValueError(f"unknown wave-speed mode {wave_mode!r}")
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    n = np.asarray(n, dtype=float)
    shape = np.broadcast_shapes(uL.shape, uR.shape, n.shape[:-1] + (uL.shape[-1],))
    m = shape[-1]
    flat = lambda a, k: np.ascontiguousarray(np.broadcast_to(a, shape[:-1] + (k,)).reshape(-1, k))
    h, speed = kernels.flux_points(_KIND_CODE[kind], flat(uL, m), flat(uR, m), flat(n, m - 2),
                                   float(gas.gamma), wave_mode == "guaranteed")
    return h.reshape(shape), speed.reshape(shape[:-1])


def interface_flux(kind, uL, uR, n, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """Dispatch to the Rusanov, HLL or Suliciu relaxation flux."""
    if not (is_admissible(uL) and is_admissible(uR)):
        raise InadmissibleStateError()
    return numerical_flux(kind, uL, uR, n, gas)[0]


def kennedy_gruber_flux(uL, uR, metric, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """Symmetric Kennedy-Gruber split flux contracted with an averaged metric vector.

    Built from arithmetic means of rho, v, E (specific total energy) and p.
    """
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    metric = np.asarray(metric, dtype=float)
    rho = 0.5 * (uL[..., 0] + uR[..., 0])
    vel = 0.5 * (uL[..., 1:-1] / uL[..., :1] + uR[..., 1:-1] / uR[..., :1])
    E = 0.5 * (uL[..., -1] / uL[..., 0] + uR[..., -1] / uR[..., 0])
    p = 0.5 * (pressure(uL, gas) + pressure(uR, gas))
    vm = dot(vel, metric)
    out = np.empty(np.broadcast_shapes(uL.shape, uR.shape,
                                       metric.shape[:-1] + (uL.shape[-1],)))
    out[..., 0] = rho * vm
    out[..., 1:-1] = (rho * vm)[..., None] * vel + p[..., None] * metric
    out[..., -1] = rho * E * vm + p * vm
    return out


def riemann_fan_average(uL, uR, n, ratio, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """Average of the Riemann fan, ``(uL + uR)/2 - ratio (f(uR) - f(uL)).n``.

    ``ratio`` plays the role of dt/h and must satisfy ``ratio * lambda <= 1/2``.
    """
    uL = np.asarray(uL, dtype=float)
    uR = np.asarray(uR, dtype=float)
    lam = max_wave_speed(uL, uR, n, gas)
    if np.any(ratio * lam > 0.5 * (1.0 + 1e-14)):
        raise ValueError("half-CFL violated")
    fL = physical_flux(uL, n, gas)
    fR = physical_flux(uR, n, gas)
    return 0.5 * (uL + uR) - np.asarray(ratio)[..., None] * (fR - fL)
