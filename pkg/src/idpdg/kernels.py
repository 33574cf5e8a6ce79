"""Compiled inner loops for the split-form volume term."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True, fastmath=False)
def _kg_lines(U, A, D, gamma):
    L, n, m = U.shape
    d = m - 2
    out = np.zeros((L, n, m))
    gm = gamma - 1.0
    for q in range(L):
        for i in range(n):
            ri = U[q, i, 0]
            ei = U[q, i, m - 1] / ri
            ke = 0.0
            for c in range(d):
                ke += U[q, i, 1 + c] * U[q, i, 1 + c]
            pi = gm * (U[q, i, m - 1] - 0.5 * ke / ri)
            for l in range(i + 1, n):
                rl = U[q, l, 0]
                el = U[q, l, m - 1] / rl
                kl = 0.0
                for c in range(d):
                    kl += U[q, l, 1 + c] * U[q, l, 1 + c]
                pl = gm * (U[q, l, m - 1] - 0.5 * kl / rl)
                rho = 0.5 * (ri + rl)
                E = 0.5 * (ei + el)
                p = 0.5 * (pi + pl)
                vm = 0.0
                for c in range(d):
                    v = 0.5 * (U[q, i, 1 + c] / ri + U[q, l, 1 + c] / rl)
                    vm += v * 0.5 * (A[q, i, c] + A[q, l, c])
                dil = D[i, l]
                dli = D[l, i]
                f0 = rho * vm
                out[q, i, 0] += dil * f0
                out[q, l, 0] += dli * f0
                for c in range(d):
                    v = 0.5 * (U[q, i, 1 + c] / ri + U[q, l, 1 + c] / rl)
                    f = f0 * v + p * 0.5 * (A[q, i, c] + A[q, l, c])
                    out[q, i, 1 + c] += dil * f
                    out[q, l, 1 + c] += dli * f
                fe = (rho * E + p) * vm
                out[q, i, m - 1] += dil * fe
                out[q, l, m - 1] += dli * fe
            # diagonal pair: consistent flux f(U_i).a_i
            dii = D[i, i]
            if dii != 0.0:
                vm = 0.0
                for c in range(d):
                    vm += U[q, i, 1 + c] / ri * A[q, i, c]
                out[q, i, 0] += dii * ri * vm
                for c in range(d):
                    out[q, i, 1 + c] += dii * (U[q, i, 1 + c] * vm + pi * A[q, i, c])
                out[q, i, m - 1] += dii * (U[q, i, m - 1] + pi) * vm
    return out


def kg_line_sums(U, A, D, gamma):
    """sum_l D_il h_KG(U_i, U_l, (a_i + a_l)/2) along lines of nodes.

    ``U`` (L, n, m) states, ``A`` (L, n, d) contravariant vectors, ``D`` (n, n).
    """
    return _kg_lines(np.ascontiguousarray(U), np.ascontiguousarray(A),
                     np.ascontiguousarray(D), float(gamma))


RUSANOV, HLL, SULICIU = 0, 1, 2


@numba.njit(cache=True)
def _side(u, n, gm):
    m = u.shape[0]
    d = m - 2
    rho = u[0]
    vn = 0.0
    ke = 0.0
    for c in range(d):
        vn += u[1 + c] * n[c]
        ke += u[1 + c] * u[1 + c]
    vn /= rho
    p = gm * (u[m - 1] - 0.5 * ke / rho)
    return rho, vn, p


@numba.njit(cache=True)
def _phys(u, n, vn, p, out):
    m = u.shape[0]
    d = m - 2
    out[0] = u[0] * vn
    for c in range(d):
        out[1 + c] = u[1 + c] * vn + p * n[c]
    out[m - 1] = (u[m - 1] + p) * vn


@numba.njit(cache=True)
def _fan(rhoL, vL, pL, cL, rhoR, vR, pR, cR, g):
    z = (g - 1.0) / (2.0 * g)
    num = cL + cR - 0.5 * (g - 1.0) * (vR - vL)
    den = cL / pL ** z + cR / pR ** z
    pstar = (max(num, 0.0) / den) ** (1.0 / z)
    fac = (g + 1.0) / (2.0 * g)
    qL = np.sqrt(1.0 + fac * max(pstar / pL - 1.0, 0.0))
    qR = np.sqrt(1.0 + fac * max(pstar / pR - 1.0, 0.0))
    return vL - cL * qL, vR + cR * qR


@numba.njit(cache=True)
def flux_points(kind, uL, uR, n, g, guaranteed):
    """Interface flux and signal speed at N points: (N, m) states, (N, d) normals."""
    N, m = uL.shape
    d = m - 2
    gm = g - 1.0
    h = np.empty((N, m))
    speed = np.empty(N)
    fL = np.empty(m)
    fR = np.empty(m)
    for q in range(N):
        a = uL[q]
        b = uR[q]
        nn = n[q]
        rhoL, vL, pL = _side(a, nn, gm)
        rhoR, vR, pR = _side(b, nn, gm)
        cL = np.sqrt(g * pL / rhoL)
        cR = np.sqrt(g * pR / rhoR)
        lam = max(abs(vL) + cL, abs(vR) + cR)
        if guaranteed:
            sl, sr = _fan(rhoL, vL, pL, cL, rhoR, vR, pR, cR, g)
            lam = max(lam, max(abs(sl), abs(sr)))
        _phys(a, nn, vL, pL, fL)
        _phys(b, nn, vR, pR, fR)
        if kind == RUSANOV:
            for c in range(m):
                h[q, c] = 0.5 * (fL[c] + fR[c]) - 0.5 * lam * (b[c] - a[c])
            speed[q] = lam
        elif kind == HLL:
            sl, sr = _fan(rhoL, vL, pL, cL, rhoR, vR, pR, cR, g)
            sl = min(sl, 0.0)
            sr = max(sr, 0.0)
            w = sr - sl
            if w <= 0.0:
                w = 1.0
            for c in range(m):
                h[q, c] = (sr * fL[c] - sl * fR[c] + sl * sr * (b[c] - a[c])) / w
            speed[q] = max(lam, max(-sl, sr))
        else:
            alpha = 0.5 * (g + 1.0)
            aL = cL
            aR = cR
            dv = vL - vR
            if pR >= pL:
                cl = rhoL * (aL + alpha * max((pR - pL) / (rhoR * aR) + dv, 0.0))
                cr = rhoR * (aR + alpha * max((pL - pR) / cl + dv, 0.0))
            else:
                cr = rhoR * (aR + alpha * max((pL - pR) / (rhoL * aL) + dv, 0.0))
                cl = rhoL * (aL + alpha * max((pR - pL) / cr + dv, 0.0))
            ustar = (cl * vL + cr * vR + pL - pR) / (cl + cr)
            pistar = (cr * pL + cl * pR - cl * cr * (vR - vL)) / (cl + cr)
            s1 = vL - cl / rhoL
            s3 = vR + cr / rhoR
            if s1 >= 0.0:
                for c in range(m):
                    h[q, c] = fL[c]
            elif s3 <= 0.0:
                for c in range(m):
                    h[q, c] = fR[c]
            else:
                if ustar >= 0.0:
                    u, rho, vn, p, cc, sgn = a, rhoL, vL, pL, cl, 1.0
                else:
                    u, rho, vn, p, cc, sgn = b, rhoR, vR, pR, cr, -1.0
                rho_s = 1.0 / (1.0 / rho + sgn * (ustar - vn) / cc)
                E_s = u[m - 1] / rho - sgn * (pistar * ustar - p * vn) / cc
                mflux = rho_s * ustar
                h[q, 0] = mflux
                for c in range(d):
                    vel = u[1 + c] / rho + (ustar - vn) * nn[c]
                    h[q, 1 + c] = mflux * vel + pistar * nn[c]
                h[q, m - 1] = (rho_s * E_s + pistar) * ustar
            speed[q] = max(lam, max(abs(s1), abs(s3)))
    return h, speed


@numba.njit(cache=True)
def _rhoe_along(uz, avg, t):
    """rho and rho*e of (1 - t) uz + t avg."""
    m = uz.shape[0]
    rho = uz[0] + t * (avg[0] - uz[0])
    ke = 0.0
    for c in range(1, m - 1):
        mc = uz[c] + t * (avg[c] - uz[c])
        ke += mc * mc
    E = uz[m - 1] + t * (avg[m - 1] - uz[m - 1])
    if rho <= 0.0:
        return rho, -np.inf
    return rho, E - 0.5 * ke / rho


@numba.njit(cache=True)
def limiter_theta(points, avg, b1, b2):
    """Per-element minimal blending factor toward the average.

    ``points`` (K, Nz, m), ``avg`` (K, m); ``b1``/``b2`` (K,) density and
    rho*e targets, assumed met by the average itself.
    """
    K, Nz, m = points.shape
    theta = np.zeros(K)
    for k in range(K):
        ra = avg[k, 0]
        M = b2[k]
        th = 0.0
        for z in range(Nz):
            uz = points[k, z]
            t = 0.0
            rz = uz[0]
            if rz < b1[k]:
                den = ra - rz
                t = (b1[k] - rz) / den if den > 0.0 else 1.0
                t = min(max(t, 0.0), 1.0)
            rho, rhoe = _rhoe_along(uz, avg[k], t)
            if not (rho > 0.0 and rhoe >= M):
                # g(s) = rho (rho e - M) along the segment is quadratic in s
                er = avg[k, 0] - rz
                eE = avg[k, m - 1] - uz[m - 1]
                a = er * eE
                b = rz * eE + er * uz[m - 1] - M * er
                c = rz * uz[m - 1] - M * rz
                for j in range(1, m - 1):
                    em = avg[k, j] - uz[j]
                    a -= 0.5 * em * em
                    b -= uz[j] * em
                    c -= 0.5 * uz[j] * uz[j]
                s = 1.0
                if abs(a) > 1e-300:
                    disc = b * b - 4.0 * a * c
                    if disc >= 0.0:
                        sq = np.sqrt(disc)
                        q = -0.5 * (b + sq) if b >= 0.0 else -0.5 * (b - sq)
                        r1 = q / a
                        r2 = c / q if q != 0.0 else r1
                        lo_r = min(r1, r2)
                        hi_r = max(r1, r2)
                        if t <= lo_r <= 1.0:
                            s = lo_r
                        elif t <= hi_r <= 1.0:
                            s = hi_r
                elif b != 0.0:
                    r = -c / b
                    if t <= r <= 1.0:
                        s = r
                rho, rhoe = _rhoe_along(uz, avg[k], s)
                if not (rho > 0.0 and rhoe >= M):
                    # safeguard: bisection on [t, 1]; the feasible set is an interval ending at 1
                    lo, hi = t, 1.0
                    for _ in range(64):
                        mid = 0.5 * (lo + hi)
                        rho, rhoe = _rhoe_along(uz, avg[k], mid)
                        if rho > 0.0 and rhoe >= M:
                            hi = mid
                        else:
                            lo = mid
                    s = hi
                t = s
            if t > th:
                th = t
        theta[k] = th
    return theta


@numba.njit(cache=True)
def normal_flux(u, n, g):
    """f(u).n at N points: ``u`` (N, m), ``n`` (N, d)."""
    N, m = u.shape
    d = m - 2
    out = np.empty((N, m))
    for q in range(N):
        rho = u[q, 0]
        vn = 0.0
        ke = 0.0
        for c in range(d):
            vn += u[q, 1 + c] * n[q, c]
            ke += u[q, 1 + c] * u[q, 1 + c]
        vn /= rho
        p = (g - 1.0) * (u[q, m - 1] - 0.5 * ke / rho)
        out[q, 0] = rho * vn
        for c in range(d):
            out[q, 1 + c] = u[q, 1 + c] * vn + p * n[q, c]
        out[q, m - 1] = (u[q, m - 1] + p) * vn
    return out


@numba.njit(cache=True)
def flux_tensor(u, g):
    """Full flux (N, m, d) at N points."""
    N, m = u.shape
    d = m - 2
    out = np.empty((N, m, d))
    for q in range(N):
        rho = u[q, 0]
        ke = 0.0
        for c in range(d):
            ke += u[q, 1 + c] * u[q, 1 + c]
        p = (g - 1.0) * (u[q, m - 1] - 0.5 * ke / rho)
        for j in range(d):
            vj = u[q, 1 + j] / rho
            out[q, 0, j] = u[q, 1 + j]
            for c in range(d):
                out[q, 1 + c, j] = u[q, 1 + c] * vj
            out[q, 1 + j, j] += p
            out[q, m - 1, j] = (u[q, m - 1] + p) * vj
    return out
