import numpy as np
import pytest

from idpdg.fluxes import (
    FluxKind, hll_middle_state, interface_flux, kennedy_gruber_flux, numerical_flux,
    riemann_fan_average, rusanov_flux,
)
from idpdg.kernels import kg_line_sums
from idpdg.physics import (
    InadmissibleStateError, admissible_mask, conserved, fan_bounds, max_wave_speed, physical_flux,
)

KINDS = list(FluxKind)


def random_states(rng, n, dim=2):
    return conserved(rng.uniform(0.05, 5, n), rng.normal(scale=2, size=(n, dim)), rng.uniform(0.01, 10, n))


def random_normals(rng, n, dim=2):
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@pytest.mark.parametrize("kind", KINDS)
def test_consistency(kind):
    rng = np.random.default_rng(1)
    u, n = random_states(rng, 100), random_normals(rng, 100)
    h, _ = numerical_flux(kind, u, u, n)
    assert np.allclose(h, physical_flux(u, n), rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("kind", KINDS)
def test_conservation_symmetry(kind):
    rng = np.random.default_rng(2)
    a, b, n = random_states(rng, 100), random_states(rng, 100), random_normals(rng, 100)
    h1, s1 = numerical_flux(kind, a, b, n)
    h2, s2 = numerical_flux(kind, b, a, -n)
    assert np.allclose(h1, -h2, rtol=1e-12, atol=1e-12)
    assert np.allclose(s1, s2)


@pytest.mark.parametrize("kind", KINDS)
def test_speed_dominates_estimate(kind):
    rng = np.random.default_rng(3)
    a, b, n = random_states(rng, 200), random_states(rng, 200), random_normals(rng, 200)
    _, s = numerical_flux(kind, a, b, n)
    assert np.all(s >= max_wave_speed(a, b, n) * (1 - 1e-14))


def test_rusanov_closed_form():
    uL = conserved(np.array(1.0), np.array([0.0]), np.array(1.0))
    uR = conserved(np.array(0.125), np.array([0.0]), np.array(0.1))
    n = np.array([1.0])
    lam = 2.0
    expect = 0.5 * (np.array([0, 1.0, 0]) + np.array([0, 0.1, 0])) - 0.5 * lam * (uR - uL)
    assert np.allclose(rusanov_flux(uL, uR, n, np.array(lam)), expect)


def test_hll_matches_reference():
    rng = np.random.default_rng(4)
    a, b, n = random_states(rng, 100), random_states(rng, 100), random_normals(rng, 100)
    sL, sR = fan_bounds(a, b, n)
    fa, fb = physical_flux(a, n), physical_flux(b, n)
    ref = np.empty_like(a)
    for i in range(len(a)):
        if sL[i] >= 0:
            ref[i] = fa[i]
        elif sR[i] <= 0:
            ref[i] = fb[i]
        else:
            ref[i] = (sR[i] * fa[i] - sL[i] * fb[i] + sL[i] * sR[i] * (b[i] - a[i])) / (sR[i] - sL[i])
    h, _ = numerical_flux(FluxKind.HLL, a, b, n)
    assert np.allclose(h, ref, rtol=1e-12, atol=1e-12)


def test_hll_middle_state_admissible():
    rng = np.random.default_rng(5)
    a, b, n = random_states(rng, 500), random_states(rng, 500), random_normals(rng, 500)
    um, _, _ = hll_middle_state(a, b, n)
    assert admissible_mask(um).all()


def test_suliciu_resolves_stationary_contact():
    a = conserved(np.array(1.0), np.array([0.0]), np.array(2.0))
    b = conserved(np.array(0.1), np.array([0.0]), np.array(2.0))
    h, _ = numerical_flux(FluxKind.SULICIU, a, b, np.array([1.0]))
    assert np.allclose(h, [0.0, 2.0, 0.0], atol=1e-14)
    h, _ = numerical_flux(FluxKind.RUSANOV, a, b, np.array([1.0]))
    assert abs(h[0]) > 1e-3


def test_supersonic_upwinding():
    a = conserved(np.array(1.0), np.array([5.0]), np.array(1.0))
    b = conserved(np.array(2.0), np.array([6.0]), np.array(1.5))
    n = np.array([1.0])
    for kind in (FluxKind.HLL, FluxKind.SULICIU):
        assert np.allclose(numerical_flux(kind, a, b, n)[0], physical_flux(a, n))


@pytest.mark.parametrize("kind", KINDS)
def test_three_point_update_is_admissible(kind):
    # a first-order update at half the signal-speed CFL stays in the admissible set
    rng = np.random.default_rng(6)
    uL, u0, uR = (random_states(rng, 400, 1) for _ in range(3))
    n = np.array([1.0])
    hR, sR = numerical_flux(kind, u0, uR, n)
    hL, sL = numerical_flux(kind, uL, u0, n)
    ratio = 0.5 / np.maximum(sR, sL)
    new = u0 - ratio[:, None] * (hR - hL)
    assert admissible_mask(new).all()


def test_riemann_fan_average():
    rng = np.random.default_rng(7)
    a, b = random_states(rng, 300, 1), random_states(rng, 300, 1)
    n = np.array([1.0])
    ratio = 0.5 / max_wave_speed(a, b, n)
    avg = riemann_fan_average(a, b, n, ratio)
    assert admissible_mask(avg).all()
    with pytest.raises(ValueError):
        riemann_fan_average(a, b, n, 2 * ratio)


def test_interface_flux_rejects_bad_states():
    good = conserved(np.array(1.0), np.array([0.0]), np.array(1.0))
    with pytest.raises(InadmissibleStateError):
        interface_flux("hll", good, np.array([1.0, 0.0, -1.0]), np.array([1.0]))


def test_kennedy_gruber_consistency_and_symmetry():
    rng = np.random.default_rng(8)
    a, b, n = random_states(rng, 50), random_states(rng, 50), random_normals(rng, 50)
    assert np.allclose(kennedy_gruber_flux(a, a, n), physical_flux(a, n))
    assert np.allclose(kennedy_gruber_flux(a, b, n), kennedy_gruber_flux(b, a, n))


def test_kg_kernel_matches_pointwise_flux():
    rng = np.random.default_rng(9)
    L, q = 3, 4
    U = random_states(rng, L * q).reshape(L, q, 4)
    A = rng.normal(size=(L, q, 2))
    D = rng.normal(size=(q, q))
    ref = np.zeros_like(U)
    for l in range(L):
        for i in range(q):
            for k in range(q):
                ref[l, i] += D[i, k] * kennedy_gruber_flux(U[l, i], U[l, k], 0.5 * (A[l, i] + A[l, k]))
    assert np.allclose(kg_line_sums(U, A, D, 1.4), ref, rtol=1e-12, atol=1e-12)


SOD = (conserved(np.array(1.0), np.array([0.0]), np.array(1.0)),
       conserved(np.array(0.125), np.array([0.0]), np.array(0.1)))
E1 = np.array([1.0])


def test_rusanov_sod_by_hand():
    uL, uR = SOD
    lam = np.sqrt(1.4)
    # f(uL) = (0, 1, 0), f(uR) = (0, 0.1, 0); uR - uL = (-0.875, 0, 0.25 - 2.5)
    expect = np.array([0.0, 0.55, 0.0]) - 0.5 * lam * np.array([-0.875, 0.0, -2.25])
    assert np.allclose(rusanov_flux(uL, uR, E1, np.array(lam)), expect, rtol=1e-15)


def test_hll_fan_average_identity_by_quadrature():
    rng = np.random.default_rng(31)
    for _ in range(5):
        a, b = random_states(rng, 1, 1)[0], random_states(rng, 1, 1)[0]
        um, sL, sR = hll_middle_state(a, b, E1)
        xi = np.linspace(0.0, max(float(sR), 0.0) + 1.0, 1_000_001)
        W = np.where((xi < sL)[:, None], a, np.where((xi < sR)[:, None], um, b))
        integral = np.trapezoid(W - b, xi, axis=0)
        # conservation on [0, X]: h - f(uR).n = integral of (W - uR) over xi > 0
        ref = physical_flux(b, E1) + integral
        h, _ = numerical_flux("hll", a, b, E1)
        assert np.allclose(h, ref, rtol=1e-5, atol=1e-5 * np.abs(ref).max())


def test_suliciu_sod_interface_updates_admissible():
    uL, uR = SOD
    h, speed = numerical_flux("suliciu", uL, uR, E1)
    assert np.all(np.isfinite(h))
    ratio = 0.5 / speed
    left = uL - ratio * (h - physical_flux(uL, E1))
    right = uR - ratio * (physical_flux(uR, E1) - h)
    assert admissible_mask(np.stack([left, right])).all()


def test_kennedy_gruber_mean_density():
    uL = conserved(np.array(1.0), np.array([0.5]), np.array(1.0))
    uR = conserved(np.array(3.0), np.array([1.5]), np.array(2.0))
    h = kennedy_gruber_flux(uL, uR, E1)
    assert np.isclose(h[0], 2.0 * 1.0)


def test_fan_average_examples():
    uL, uR = SOD
    lam = max_wave_speed(uL, uR, E1)
    ratio = 1.0 / (2.0 * lam)
    closed = (lam * uR + lam * uL - (physical_flux(uR, E1) - physical_flux(uL, E1))) / (2 * lam)
    assert np.allclose(riemann_fan_average(uL, uR, E1, ratio), closed)
    assert np.allclose(riemann_fan_average(uL, uR, E1, 0.0), 0.5 * (uL + uR))
    assert np.allclose(riemann_fan_average(uL, uL, E1, 0.3 * ratio), uL)


def test_fan_average_admissible_on_many_pairs():
    rng = np.random.default_rng(32)
    a, b = random_states(rng, 10_000, 1), random_states(rng, 10_000, 1)
    ratio = 0.5 / max_wave_speed(a, b, E1)
    assert admissible_mask(riemann_fan_average(a, b, E1, ratio)).all()


@pytest.mark.parametrize("kind", KINDS)
def test_conservation_on_many_pairs(kind):
    rng = np.random.default_rng(33)
    a, b, n = random_states(rng, 1000), random_states(rng, 1000), random_normals(rng, 1000)
    h1, _ = numerical_flux(kind, a, b, n)
    h2, _ = numerical_flux(kind, b, a, -n)
    assert np.abs(h1 + h2).max() < 1e-12 * max(1.0, np.abs(h1).max())


@pytest.mark.parametrize("ka", KINDS)
@pytest.mark.parametrize("kb", KINDS)
def test_mixed_pair_update_is_admissible(ka, kb):
    # two fluxes from different approximate solvers on either side of the cell
    rng = np.random.default_rng(34)
    uL, u0, uR = (random_states(rng, 10_000, 1) for _ in range(3))
    hR, sR = numerical_flux(ka, u0, uR, E1)
    hL, sL = numerical_flux(kb, uL, u0, E1)
    ratio = 0.5 / np.maximum(sR, sL)
    assert admissible_mask(u0 - ratio[:, None] * (hR - hL)).all()
