import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitfem.fem import (
    FeFunction,
    SubdomainField,
    VectorField,
    apply_dirichlet,
    assemble_boundary_load,
    assemble_convection,
    assemble_diffusion,
    assemble_load,
    error_vs_exact,
    fe_space,
    gram_h1,
    norm,
    zero_rows,
)
from splitfem.mesh import structured_rectangle, uniform_interval
from splitfem.sparse import factorize


def p1_stiffness_oracle(mesh):
    """Independent constant-coefficient stiffness: K_T = |T| G G^T with the
    shape-function gradients taken straight from the vertex geometry."""
    n = mesh.num_vertices
    K = np.zeros((n, n))
    for tri in mesh.triangles:
        p = mesh.vertices[tri]
        mat = np.column_stack([np.ones(3), p])        # inverts barycentric map
        grads = np.linalg.inv(mat)[1:, :].T           # (3, 2) per-vertex gradients
        d1, d2 = p[1] - p[0], p[2] - p[0]
        area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
        K[np.ix_(tri, tri)] += area * grads @ grads.T
    return K


def simpson_load_oracle(mesh, f):
    """Independent load for 1-D P1: Simpson's rule on each element, exact for
    the quadratic integrands produced by linear f times hat functions."""
    out = np.zeros(len(mesh.nodes))
    for i in range(mesh.num_elements):
        a, b = mesh.nodes[i], mesh.nodes[i + 1]
        xm = 0.5 * (a + b)
        h = b - a
        for loc, phi in ((i, lambda x: (b - x) / h), (i + 1, lambda x: (x - a) / h)):
            out[loc] += h / 6.0 * (f(a) * phi(a) + 4 * f(xm) * phi(xm) + f(b) * phi(b))
    return out


# ---------------------------------------------------------------------------
# diffusion assembly

def test_p1_stiffness_two_elements():
    space = fe_space(uniform_interval(0, 1, 2), 1)
    A = assemble_diffusion(space, 1.0).toarray()
    assert np.allclose(A, [[2, -2, 0], [-2, 4, -2], [0, -2, 2]], atol=1e-14)


def test_zero_coefficient_gives_zero_matrix():
    space = fe_space(uniform_interval(0, 1, 3), 1)
    assert np.all(assemble_diffusion(space, 0.0).toarray() == 0)


def test_2d_stiffness_matches_geometric_oracle():
    mesh = structured_rectangle(0, 1, 0, 1, 1, 1)
    space = fe_space(mesh, 1, dirichlet_sides=())
    A = assemble_diffusion(space, 1.0).toarray()
    assert np.allclose(A, p1_stiffness_oracle(mesh), atol=1e-14)
    # frozen values computed from the oracle
    assert np.allclose(A, [[1.0, -0.5, -0.5, 0.0],
                           [-0.5, 1.0, 0.0, -0.5],
                           [-0.5, 0.0, 1.0, -0.5],
                           [0.0, -0.5, -0.5, 1.0]], atol=1e-14)


@settings(deadline=None, max_examples=20)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 1000))
def test_2d_variable_stiffness_matches_oracle_structure(nx, ny, seed):
    mesh = structured_rectangle(0, 1, 0, 1, nx, ny)
    space = fe_space(mesh, 1)
    A = assemble_diffusion(space, 1.0).toarray()
    assert np.allclose(A, p1_stiffness_oracle(mesh), atol=1e-13)


@settings(deadline=None, max_examples=25)
@given(st.integers(1, 4), st.integers(1, 4), st.floats(0.1, 5.0))
def test_diffusion_exactly_symmetric(nx, ny, amp):
    mesh = structured_rectangle(-1, 1, -1, 1, nx, ny)
    space = fe_space(mesh, 1)
    A = assemble_diffusion(space, lambda p: 1.0 + amp * np.sin(p[:, 0] + 2 * p[:, 1]))
    dense = A.toarray()
    assert np.array_equal(dense, dense.T)     # bitwise, not just approximate


def test_p2_diffusion_exact_for_quadratic():
    # with a=1 the P2 space contains x - x^2, so the discrete solution of
    # -u'' = 2 with zero boundary values reproduces it exactly
    space = fe_space(uniform_interval(0, 1, 3), 2)
    A = assemble_diffusion(space, 1.0)
    rhs = assemble_load(space, 2.0)
    Ad, rd = apply_dirichlet(A, rhs, space, symmetric=True)
    u = factorize(Ad).solve(rd)
    x = space.dof_coords
    assert np.allclose(u, x * (1 - x), atol=1e-13)


# ---------------------------------------------------------------------------
# convection assembly

def test_convection_zero_field():
    space = fe_space(uniform_interval(0, 1, 3), 1)
    assert np.all(assemble_convection(space, 0.0).toarray() == 0)


def test_convection_interior_row_1d():
    # b = 1, P1: interior row integrates phi_j' phi_i to (-1/2, 0, 1/2)
    space = fe_space(uniform_interval(0, 1, 2), 1)
    C = assemble_convection(space, 1.0).toarray()
    assert np.allclose(C[1], [-0.5, 0.0, 0.5], atol=1e-14)


def test_convection_annihilates_constants_2d():
    mesh = structured_rectangle(0, 1, 0, 1, 4, 4)
    space = fe_space(mesh, 1)

    def wind(p):
        return 2.001 * np.column_stack([
            2 * p[:, 1] * (1 - p[:, 0]**2), -2 * p[:, 0] * (1 - p[:, 1]**2)])

    C = assemble_convection(space, VectorField(wind))
    ones = np.ones(space.num_dofs)
    scale = np.abs(C.toarray()).max()
    assert np.abs(C.to_scipy() @ ones).max() <= 1e-12 * scale


# ---------------------------------------------------------------------------
# loads

def test_load_zero_and_constant():
    space = fe_space(uniform_interval(0, 1, 2), 1)
    assert np.all(assemble_load(space, 0.0) == 0)
    assert np.allclose(assemble_load(space, 1.0), [0.25, 0.5, 0.25], atol=1e-15)


def test_load_linear_source_matches_simpson_oracle():
    mesh = uniform_interval(0, 1, 7)
    space = fe_space(mesh, 1)
    f = lambda x: 51.0 - 100.0 * x
    got = assemble_load(space, f)
    assert np.allclose(got, simpson_load_oracle(mesh, f), atol=1e-12)


def test_load_of_fe_interpolant_equals_mass_action():
    # for f already in the P1 space the load is exactly M times its coefficients
    from splitfem.fem import mass_matrix
    mesh = uniform_interval(0, 1, 6)
    space = fe_space(mesh, 1)
    rng = np.random.default_rng(4)
    coeffs = rng.standard_normal(space.num_dofs)
    f = lambda x: np.interp(x, space.dof_coords, coeffs)
    load = assemble_load(space, f)
    assert np.allclose(load, mass_matrix(space).to_scipy() @ coeffs, atol=1e-13)


def test_boundary_load_partition_of_unity():
    mesh = structured_rectangle(-1, 1, -1, 1, 4, 4)
    space = fe_space(mesh, 1, dirichlet_sides=("top",))
    vec = assemble_boundary_load(space, "bottom", 1.0)
    assert vec.sum() == pytest.approx(2.0, rel=1e-12)    # length of the bottom side
    assert np.all(assemble_boundary_load(space, "bottom", 0.0) == 0)
    neg = assemble_boundary_load(space, "bottom", -1.0)
    assert np.allclose(neg, -vec, atol=1e-15)


def test_boundary_load_needs_2d():
    space = fe_space(uniform_interval(0, 1, 2), 1)
    with pytest.raises(ValueError):
        assemble_boundary_load(space, "bottom", 1.0)


# ---------------------------------------------------------------------------
# Dirichlet handling

def test_dirichlet_noop_without_dofs():
    space = fe_space(uniform_interval(0, 1, 2), 1, dirichlet_sides=())
    A = assemble_diffusion(space, 1.0)
    rhs = assemble_load(space, 1.0)
    Ad, rd = apply_dirichlet(A, rhs, space)
    assert np.array_equal(Ad.toarray(), A.toarray())
    assert np.array_equal(rd, rhs)


def test_dirichlet_all_dofs_identity():
    space = fe_space(uniform_interval(0, 1, 1), 1)   # both dofs on the boundary
    A = assemble_diffusion(space, 1.0)
    Ad, rd = apply_dirichlet(A, assemble_load(space, 1.0), space, symmetric=True)
    assert np.array_equal(Ad.toarray(), np.eye(2))
    assert np.all(rd == 0)
    assert np.all(factorize(Ad).solve(rd) == 0)


def test_dirichlet_solution_is_one_eighth():
    space = fe_space(uniform_interval(0, 1, 2), 1)
    A = assemble_diffusion(space, 1.0)
    Ad, rd = apply_dirichlet(A, assemble_load(space, 1.0), space, symmetric=True)
    assert np.allclose(factorize(Ad).solve(rd), [0, 0.125, 0], atol=1e-15)


def test_dirichlet_rejects_nonzero_value():
    space = fe_space(uniform_interval(0, 1, 2), 1)
    A = assemble_diffusion(space, 1.0)
    with pytest.raises(ValueError):
        apply_dirichlet(A, np.zeros(3), space, value=1.0)


def test_zero_rows_clears_rows_only():
    space = fe_space(uniform_interval(0, 1, 2), 1)
    A = assemble_diffusion(space, 1.0)
    Z = zero_rows(A, [0, 2]).toarray()
    assert np.all(Z[[0, 2]] == 0)
    assert np.allclose(Z[1], [-2, 4, -2])


def test_nodal_exactness_poisson_p1():
    # classic 1-D property: P1 solution of -u''=1 interpolates x(1-x)/2
    space = fe_space(uniform_interval(0, 1, 5), 1)
    A = assemble_diffusion(space, 1.0)
    Ad, rd = apply_dirichlet(A, assemble_load(space, 1.0), space, symmetric=True)
    u = factorize(Ad).solve(rd)
    x = space.dof_coords
    assert np.allclose(u, 0.5 * x * (1 - x), atol=1e-14)


# ---------------------------------------------------------------------------
# norms and errors

def test_norms_zero_function():
    space = fe_space(uniform_interval(0, 1, 4), 1)
    u = FeFunction(space, np.zeros(space.num_dofs))
    for kind in ("L2", "H1semi", "H1"):
        assert norm(u, kind) == 0.0


def test_norms_linear_function():
    space = fe_space(uniform_interval(0, 1, 4), 1)
    u = FeFunction(space, space.dof_coords.copy())
    assert norm(u, "L2") == pytest.approx(1 / np.sqrt(3), rel=1e-13)
    assert norm(u, "H1semi") == pytest.approx(1.0, rel=1e-13)
    assert norm(u, "H1") == pytest.approx(np.sqrt(1 + 1 / 3), rel=1e-13)


def test_norms_p2_parabola():
    space = fe_space(uniform_interval(0, 1, 3), 2)
    x = space.dof_coords
    u = FeFunction(space, x * (1 - x))
    assert norm(u, "L2") == pytest.approx(1 / np.sqrt(30), rel=1e-13)
    assert norm(u, "H1semi") == pytest.approx(1 / np.sqrt(3), rel=1e-13)


def test_norm_agrees_with_h1_gram():
    space = fe_space(uniform_interval(0, 1, 6), 2)
    rng = np.random.default_rng(5)
    c = rng.standard_normal(space.num_dofs)
    via_quad = norm(FeFunction(space, c), "H1")
    via_gram = np.sqrt(c @ (gram_h1(space).to_scipy() @ c))
    assert via_quad == pytest.approx(via_gram, rel=1e-12)


def test_error_vs_self_is_zero():
    space = fe_space(uniform_interval(0, 1, 5), 1)
    x = space.dof_coords
    u = FeFunction(space, 2 * x.copy())
    err = error_vs_exact(u, lambda t: 2 * t, lambda t: np.full_like(t, 2.0), "H1")
    assert err <= 1e-13


def test_error_of_zero_against_parabola():
    space = fe_space(uniform_interval(0, 1, 5), 1)
    u = FeFunction(space, np.zeros(space.num_dofs))
    err = error_vs_exact(u, lambda t: t - t**2, kind="L2")
    assert err == pytest.approx(1 / np.sqrt(30), rel=1e-12)


def test_error_quadrature_override_stable():
    space = fe_space(uniform_interval(0, 1, 32), 2)
    x = space.dof_coords
    u = FeFunction(space, np.sin(2 * np.pi * x))
    exact = lambda t: np.sin(2 * np.pi * t)
    grad = lambda t: 2 * np.pi * np.cos(2 * np.pi * t)
    e5 = error_vs_exact(u, exact, grad, "H1")
    e8 = error_vs_exact(u, exact, grad, "H1", npoints=8)
    assert e5 == pytest.approx(e8, rel=1e-6)


def test_subdomain_field_assembly():
    mesh = structured_rectangle(-1, 1, -1, 1, 4, 4, disk=((0, 0), 0.5))
    space = fe_space(mesh, 1, dirichlet_sides=("top",))
    K_full = assemble_diffusion(space, SubdomainField(mesh, [1.0, 3.0]))
    K_out = assemble_diffusion(space, SubdomainField(mesh, [1.0, 0.0]))
    K_disk = assemble_diffusion(space, SubdomainField(mesh, [0.0, 1.0]))
    combined = K_out.to_scipy() + 3.0 * K_disk.to_scipy()
    assert np.allclose(K_full.toarray(), combined.toarray(), atol=1e-14)


def test_2d_degree2_not_supported():
    mesh = structured_rectangle(0, 1, 0, 1, 2, 2)
    with pytest.raises(NotImplementedError):
        fe_space(mesh, 2)


def test_dof_counts():
    m = uniform_interval(0, 1, 8)
    assert fe_space(m, 1).num_dofs == 9
    assert fe_space(m, 2).num_dofs == 17
    mesh = structured_rectangle(0, 1, 0, 1, 3, 2)
    assert fe_space(mesh, 1).num_dofs == 12
