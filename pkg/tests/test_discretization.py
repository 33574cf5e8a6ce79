import numpy as np
import pytest

from idpdg.cases import smooth_wave_exact
from idpdg.discretization import FieldState, build_operator, ghost_state
from idpdg.fluxes import kennedy_gruber_flux, numerical_flux
from idpdg.mesh import BoundaryTag, QuadMeshSpec, build_quad_mesh, build_segment_mesh
from idpdg.physics import InadmissibleStateError, conserved, physical_flux

SCHEMES = ["modal_dg", "dgsem"]


def periodic_1d(n):
    return build_segment_mesh(0.0, 1.0, n, BoundaryTag.PERIODIC, BoundaryTag.PERIODIC)


def curved_periodic():
    return build_quad_mesh(QuadMeshSpec(5, 5, distortion=0.15, degree=2, periodic_x=True, periodic_y=True))


@pytest.mark.parametrize("scheme", SCHEMES)
def test_free_stream_rate_vanishes(scheme):
    op = build_operator(curved_periodic(), scheme, 3)
    state = conserved(np.array(1.2), np.array([0.3, -0.8]), np.array(2.0))
    # rate times the element size h = 0.2, relative to the state magnitude
    drift = np.abs(op.rate(op.constant_field(state))).max() * 0.2 / np.abs(state).max()
    assert drift < 1e-12


@pytest.mark.parametrize("scheme", SCHEMES)
def test_rate_conserves_totals(scheme):
    op = build_operator(curved_periodic(), scheme, 3)
    f = lambda y: conserved(1.5 + 0.3 * np.sin(2 * np.pi * y[..., 0]) * np.cos(2 * np.pi * y[..., 1]),
                            np.stack([np.cos(2 * np.pi * y[..., 1]), 0.5 + 0 * y[..., 0]], -1),
                            1.0 + 0.2 * np.sin(2 * np.pi * (y[..., 0] + y[..., 1])))
    field = op.project(f)
    dtot = op.totals(FieldState(op.rate(field), field.scheme, field.p))
    assert np.abs(dtot).max() < 1e-12


@pytest.mark.parametrize("scheme", SCHEMES)
def test_average_rate_matches_flux_difference(scheme):
    n = 40
    op = build_operator(periodic_1d(n), scheme, 3)
    field = op.project(lambda y: smooth_wave_exact(y[..., 0], 0.0))
    rate = op.cell_average(FieldState(op.rate(field), field.scheme, field.p))
    edges = np.linspace(0, 1, n + 1)
    f = physical_flux(smooth_wave_exact(edges, 0.0), np.array([1.0]))
    assert np.abs(rate + np.diff(f, axis=0) * n).max() < 1e-5


LOBATTO = {
    1: (np.array([[-0.5, 0.5], [-0.5, 0.5]]), np.array([1.0, 1.0])),
    2: (np.array([[-1.5, 2.0, -0.5], [-0.5, 0.0, 0.5], [0.5, -2.0, 1.5]]), np.array([1 / 3, 4 / 3, 1 / 3])),
}


@pytest.mark.parametrize("p", [1, 2])
def test_dgsem_residual_against_strong_form(p):
    D, w = LOBATTO[p]
    n = 5
    op = build_operator(periodic_1d(n), "dgsem", p)
    rng = np.random.default_rng(p)
    U = conserved(rng.uniform(0.5, 2, (n, p + 1)), rng.normal(size=(n, p + 1, 1)), rng.uniform(0.5, 2, (n, p + 1)))
    field = FieldState(U.copy(), op.scheme, p)
    J = 0.5 / n
    e = np.array([1.0])
    ref = np.zeros_like(U)
    for k in range(n):
        hl, _ = numerical_flux("suliciu", U[k - 1, -1], U[k, 0], e)
        hr, _ = numerical_flux("suliciu", U[k, -1], U[(k + 1) % n, 0], e)
        for i in range(p + 1):
            vol = sum(2 * D[i, l] * kennedy_gruber_flux(U[k, i], U[k, l], e) for l in range(p + 1))
            ref[k, i] = -vol / J
        ref[k, -1] -= (hr - physical_flux(U[k, -1], e)) / (J * w[-1])
        ref[k, 0] += (hl - physical_flux(U[k, 0], e)) / (J * w[0])
    assert np.allclose(op.rate(field), ref, rtol=1e-12, atol=1e-11)


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("dim", [1, 2])
def test_evaluate_reproduces_volume_values(scheme, dim):
    mesh = periodic_1d(4) if dim == 1 else curved_periodic()
    op = build_operator(mesh, scheme, 3)
    rng = np.random.default_rng(0)
    field = FieldState(rng.normal(size=(op.n_elements, op.mass.shape[1], dim + 2)), op.scheme, 3)
    if scheme == "dgsem":
        import idpdg.quadrature as quad
        ref, _ = quad.tensor_rule(quad.gauss_lobatto(4), dim)
    else:
        import idpdg.quadrature as quad
        ref, _ = quad.tensor_rule(quad.gauss_legendre(op.V.shape[1] if dim == 1 else int(np.sqrt(op.V.shape[1]))), dim)
    u, x = op.evaluate(field, ref)
    assert np.allclose(u, op.volume_values(field), atol=1e-12)
    assert np.allclose(x, op.geom.y, atol=1e-13)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_projection_of_polynomial_is_exact(scheme):
    op = build_operator(build_segment_mesh(0, 2, 3), scheme, 3)
    f = lambda y: conserved(2 + y[..., 0] ** 3, 0.5 + 0 * y[..., :1], 1 + 0.1 * y[..., 0] ** 2)
    field = op.project(f)
    pts = np.array([[-0.7], [0.2], [0.9]])
    u, x = op.evaluate(field, pts)
    assert np.allclose(u, f(x), atol=1e-12)


def test_blend_preserves_average():
    for scheme in SCHEMES:
        op = build_operator(periodic_1d(6), scheme, 2)
        field = op.project(lambda y: smooth_wave_exact(y[..., 0], 0.0))
        theta = np.linspace(0, 1, 6)
        out = op.blend_to_average(field, theta)
        assert np.allclose(op.cell_average(out), op.cell_average(field))
        assert np.allclose(op.volume_values(out)[-1], op.cell_average(field)[-1])


def test_ghost_states():
    u = conserved(np.array(1.0), np.array([2.0, 1.0]), np.array(1.0))
    n = np.array([1.0, 0.0])
    g = ghost_state(BoundaryTag.SLIP_WALL, u, n)
    assert np.allclose(g, [1.0, -2.0, 1.0, u[-1]])
    assert np.allclose(ghost_state("Outflow", u, n), u)
    with pytest.raises(ValueError):
        ghost_state("Inflow", u, n)
    with pytest.raises(ValueError):
        ghost_state("Periodic", u, n)


def test_residual_rejects_inadmissible_states():
    op = build_operator(periodic_1d(3), "modal_dg", 1)
    field = op.constant_field(np.array([1.0, 0.0, 1.0]))
    field.coeffs[1, 0, 0] = -1.0
    with pytest.raises(InadmissibleStateError):
        op.rate(field)


def test_degree_checks():
    with pytest.raises(ValueError):
        build_operator(periodic_1d(3), "dgsem", 0)
    with pytest.raises(ValueError):
        build_operator(curved_periodic(), "modal_dg", 1)


def _smooth_2d(y):
    return conserved(1.5 + 0.3 * np.sin(2 * np.pi * y[..., 0]) * np.cos(2 * np.pi * y[..., 1]),
                     np.stack([np.cos(2 * np.pi * y[..., 1]), 0.5 + 0 * y[..., 0]], -1),
                     1.0 + 0.2 * np.sin(2 * np.pi * (y[..., 0] + y[..., 1])))


@pytest.mark.parametrize("scheme", SCHEMES)
def test_forward_euler_cell_average_identity(scheme):
    mesh = build_quad_mesh(QuadMeshSpec(4, 4, distortion=0.15, degree=2))
    op = build_operator(mesh, scheme, 3)
    field = op.project(_smooth_2d)
    um, up = op.trace_eval(field)
    h, _ = op.face_fluxes(um, up)
    dt = 1e-3
    new = FieldState(field.coeffs - dt * op.residual(field) / op.mass[..., None], field.scheme, field.p)
    lhs = op.cell_average(new) - op.cell_average(field) + dt * np.einsum("kf,kfm->km", op.s, h)
    assert np.abs(lhs).max() < 1e-12


def test_dgsem_residual_telescopes_to_face_fluxes():
    op = build_operator(curved_periodic(), "dgsem", 3)
    field = op.project(_smooth_2d)
    um, up = op.trace_eval(field)
    h, _ = op.face_fluxes(um, up)
    faces = np.einsum("kf,kfm->km", op.geom.face_weights * op.geom.Jf, h)
    assert np.allclose(op.residual(field).sum(axis=1), faces, atol=1e-12)


def test_traces_of_linear_data_match():
    op = build_operator(build_segment_mesh(0, 1, 5), "modal_dg", 2)
    field = op.project(lambda y: conserved(1 + y[..., 0], 0 * y, 1 + 0 * y[..., 0]))
    um, up = op.trace_eval(field)
    inner = op.nbr_elem >= 0
    assert np.abs(um[inner] - up[inner]).max() < 1e-13
    c = op.constant_field(np.array([1.0, 0.2, 2.0]))
    um, up = op.trace_eval(c)
    assert np.allclose(um, [1.0, 0.2, 2.0]) and np.allclose(up, um)


def test_single_element_mean_mode_is_flux_difference():
    op = build_operator(build_segment_mesh(0, 1, 1), "modal_dg", 3)
    f = lambda y: conserved(1 + 0.3 * y[..., 0] ** 2, 0.4 + 0.1 * y, 1 + y[..., 0])
    field = op.project(f)
    ends = f(np.array([[0.0], [1.0]]))
    e = np.array([1.0])
    # outflow copies the trace, so both boundary fluxes are physical fluxes
    expect = physical_flux(ends[1], e) - physical_flux(ends[0], e)
    assert np.allclose(op.residual(field)[0, 0], expect, atol=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_divergence_free_density_flux(scheme):
    # rho = 1 with v = (sin 2 pi y, sin 2 pi x) has div(rho v) = 0
    def f(y):
        v = np.stack([np.sin(2 * np.pi * y[..., 1]), np.sin(2 * np.pi * y[..., 0])], -1)
        return conserved(1.0 + 0 * y[..., 0], v, 1.0 + 0 * y[..., 0])
    errs = []
    for n in (8, 16):
        mesh = build_quad_mesh(QuadMeshSpec(n, n, periodic_x=True, periodic_y=True))
        op = build_operator(mesh, scheme, 3)
        errs.append(np.abs(op.rate(op.project(f))[..., 0]).max())
    if scheme == "dgsem":
        # nodal data is continuous and each velocity component is constant
        # along its own direction: the terms cancel up to roundoff
        assert max(errs) < 1e-11
    else:
        # projected traces jump at faces, so cancellation is up to truncation
        assert errs[1] < 1e-3 and errs[1] < errs[0] / 4


@pytest.mark.parametrize("scheme", SCHEMES)
def test_cell_average_oracles(scheme):
    op = build_operator(curved_periodic(), scheme, 3)
    field = op.project(_smooth_2d)
    avg = op.cell_average(field)
    if scheme == "modal_dg":
        assert np.array_equal(avg, field.coeffs[:, 0])
    else:
        direct = np.einsum("ki,kim->km", op.geom.vol_weights * op.geom.J, field.coeffs) / op.geom.volume[:, None]
        assert np.allclose(avg, direct, rtol=1e-14)
    assert np.allclose(op.cell_average_by_rule(field), avg, atol=1e-12)
    c = np.array([1.0, 0.5, -0.5, 3.0])
    assert np.allclose(op.cell_average(op.constant_field(c)), c)


def test_dmr_inflow_ghost_is_post_shock():
    from idpdg.cases import dmr_states
    _, post = dmr_states()
    u = conserved(np.array(1.4), np.array([0.0, 0.0]), np.array(1.0))
    g = ghost_state("Inflow", u, np.array([-1.0, 0.0]), inflow=post)
    assert np.allclose(g, conserved(np.array(8.0), np.array([8.25, 0.0]), np.array(116.5)))
    s = ghost_state("Symmetry", conserved(np.array(1.0), np.array([1.0, 0.0]), np.array(1.0)), np.array([1.0, 0.0]))
    assert np.allclose(s[1:3], [-1.0, 0.0])
