"""Exact solution of the 1D polytropic-gas Riemann problem (test oracle only)."""

from __future__ import annotations

import numpy as np

from .physics import DEFAULT_GAS, GasModel, InadmissibleStateError, conserved, is_admissible, primitive


class VacuumError(InadmissibleStateError):
    def __init__(self):
        super().__init__("vacuum formation")


def _wave_function(p, rho, pk, ck, gamma):
    """Toro's f_K(p) and its derivative for one side of the star region."""
    if p > pk:
        a = 2.0 / ((gamma + 1.0) * rho)
        b = (gamma - 1.0) / (gamma + 1.0) * pk
        sq = np.sqrt(a / (p + b))
        return (p - pk) * sq, sq * (1.0 - 0.5 * (p - pk) / (p + b))
    ratio = p / pk
    f = 2.0 * ck / (gamma - 1.0) * (ratio ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
    df = ratio ** (-(gamma + 1.0) / (2.0 * gamma)) / (rho * ck)
    return f, df


def star_state(left, right, gamma: float, tol: float = 1e-14, max_iter: int = 100):
    """Pressure and velocity in the star region from primitive ``(rho, u, p)`` triples."""
    rhoL, uL, pL = left
    rhoR, uR, pR = right
    cL = np.sqrt(gamma * pL / rhoL)
    cR = np.sqrt(gamma * pR / rhoR)
    du = uR - uL
    if 2.0 * (cL + cR) / (gamma - 1.0) <= du:
        raise VacuumError()

    # two-rarefaction initial guess
    z = (gamma - 1.0) / (2.0 * gamma)
    p = ((cL + cR - 0.5 * (gamma - 1.0) * du) / (cL / pL**z + cR / pR**z)) ** (1.0 / z)
    p = max(p, 1e-14 * min(pL, pR))
    for _ in range(max_iter):
        fL, dfL = _wave_function(p, rhoL, pL, cL, gamma)
        fR, dfR = _wave_function(p, rhoR, pR, cR, gamma)
        g = fL + fR + du
        p_new = p - g / (dfL + dfR)
        if p_new <= 0.0:
            p_new = 0.5 * p
        converged = abs(p_new - p) <= tol * 0.5 * (p_new + p)
        p = p_new
        if converged:
            break
    else:
        raise RuntimeError("star-pressure iteration did not converge")
    fL, _ = _wave_function(p, rhoL, pL, cL, gamma)
    fR, _ = _wave_function(p, rhoR, pR, cR, gamma)
    return p, 0.5 * (uL + uR) + 0.5 * (fR - fL)


def _sample(xi, left, right, pstar, ustar, gamma):
    rhoL, uL, pL = left
    rhoR, uR, pR = right
    gm, gp = gamma - 1.0, gamma + 1.0
    if xi <= ustar:
        rho, u, p = rhoL, uL, pL
        c = np.sqrt(gamma * p / rho)
        if pstar > p:
            ratio = pstar / p
            s = u - c * np.sqrt(gp / (2 * gamma) * ratio + gm / (2 * gamma))
            if xi <= s:
                return rho, u, p
            return rho * (ratio + gm / gp) / (gm / gp * ratio + 1.0), ustar, pstar
        cstar = c * (pstar / p) ** (gm / (2 * gamma))
        if xi <= u - c:
            return rho, u, p
        if xi >= ustar - cstar:
            return rho * (pstar / p) ** (1.0 / gamma), ustar, pstar
        cf = 2.0 / gp * (c + 0.5 * gm * (u - xi))
        uf = 2.0 / gp * (c + 0.5 * gm * u + xi)
        return rho * (cf / c) ** (2.0 / gm), uf, p * (cf / c) ** (2.0 * gamma / gm)
    rho, u, p = rhoR, uR, pR
    c = np.sqrt(gamma * p / rho)
    if pstar > p:
        ratio = pstar / p
        s = u + c * np.sqrt(gp / (2 * gamma) * ratio + gm / (2 * gamma))
        if xi >= s:
            return rho, u, p
        return rho * (ratio + gm / gp) / (gm / gp * ratio + 1.0), ustar, pstar
    cstar = c * (pstar / p) ** (gm / (2 * gamma))
    if xi >= u + c:
        return rho, u, p
    if xi <= ustar + cstar:
        return rho * (pstar / p) ** (1.0 / gamma), ustar, pstar
    cf = 2.0 / gp * (c - 0.5 * gm * (u - xi))
    uf = 2.0 / gp * (-c + 0.5 * gm * u + xi)
    return rho * (cf / c) ** (2.0 / gm), uf, p * (cf / c) ** (2.0 * gamma / gm)


class ExactRiemannSolution:
    """Self-similar solution W(x/t; uL, uR) for 1D conserved states."""

    def __init__(self, uL, uR, gas: GasModel = DEFAULT_GAS):
        uL = np.asarray(uL, dtype=float)
        uR = np.asarray(uR, dtype=float)
        if uL.shape != (3,) or uR.shape != (3,):
            raise ValueError("exact Riemann solver is 1D only")
        if not (is_admissible(uL) and is_admissible(uR)):
            raise InadmissibleStateError()
        self.gas = gas
        rl, vl, pl = primitive(uL, gas)
        rr, vr, pr = primitive(uR, gas)
        self.left = (float(rl), float(vl[0]), float(pl))
        self.right = (float(rr), float(vr[0]), float(pr))
        self.pstar, self.ustar = star_state(self.left, self.right, gas.gamma)

    def primitive_at(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.array([_sample(x, self.left, self.right, self.pstar, self.ustar,
                                self.gas.gamma) for x in xi.ravel()])
        return out.reshape(xi.shape + (3,))

    def __call__(self, xi):
        w = self.primitive_at(xi)
        return conserved(w[..., 0], w[..., 1], w[..., 2], self.gas)


def exact_riemann_solution(uL, uR, xi, gas: GasModel = DEFAULT_GAS) -> np.ndarray:
    """Conserved state of the exact Riemann solution sampled at ``xi = x/t``."""
    out = ExactRiemannSolution(uL, uR, gas)(xi)
    return out[0] if np.ndim(xi) == 0 else out


def shock_post_state(rho1: float, p1: float, mach: float, gas: GasModel = DEFAULT_GAS):
    """Rankine-Hugoniot state behind a shock of Mach ``mach`` moving into gas at rest.

    Returns primitive ``(rho2, u2, p2)`` and the shock speed.
    """
    g = gas.gamma
    c1 = np.sqrt(g * p1 / rho1)
    speed = mach * c1
    m2 = mach * mach
    rho2 = rho1 * (g + 1.0) * m2 / ((g - 1.0) * m2 + 2.0)
    p2 = p1 * (2.0 * g * m2 - (g - 1.0)) / (g + 1.0)
    u2 = speed * (1.0 - rho1 / rho2)
    return (rho2, u2, p2), speed
