import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splitfem.fem import apply_dirichlet, assemble_diffusion, assemble_load, fe_space
from splitfem.mesh import uniform_interval
from splitfem.sparse import (
    CsrMatrix,
    SingularMatrixError,
    assemble_from_triplets,
    estimate_speedup,
    factorize,
    solve_many,
    spmv,
)


def dense_gauss_solve(A, b):
    """Independent oracle: plain Gaussian elimination with partial pivoting."""
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = len(b)
    for k in range(n):
        p = k + np.argmax(np.abs(A[k:, k]))
        A[[k, p]] = A[[p, k]]
        b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            m = A[i, k] / A[k, k]
            A[i, k:] -= m * A[k, k:]
            b[i] -= m * b[k]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (b[i] - A[i, i + 1:] @ x[i + 1:]) / A[i, i]
    return x


def random_well_conditioned(n, rng):
    A = rng.standard_normal((n, n))
    A += n * np.eye(n)          # diagonally dominant in expectation
    return A


# ---------------------------------------------------------------------------
# triplet assembly

def test_triplets_sum_duplicates():
    A = assemble_from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0)])
    assert A.nnz == 1
    assert A.toarray()[0, 0] == 3.0


def test_triplets_empty():
    A = assemble_from_triplets(2, 2, [])
    assert A.nnz == 0
    assert np.all(A.toarray() == 0)


def test_triplets_sorted_within_rows():
    A = assemble_from_triplets(2, 2, [(1, 0, 5.0), (0, 1, 7.0)])
    assert np.array_equal(A.toarray(), [[0, 7], [5, 0]])
    for r in range(A.nrows):
        cols = A.col_indices[A.row_offsets[r]:A.row_offsets[r + 1]]
        assert np.all(np.diff(cols) > 0)


def test_triplets_out_of_range():
    with pytest.raises(ValueError):
        assemble_from_triplets(2, 2, [(2, 0, 1.0)])
    with pytest.raises(ValueError):
        assemble_from_triplets(2, 2, [(0, -1, 1.0)])


def test_csr_invariants_enforced():
    with pytest.raises(ValueError):
        CsrMatrix(2, 2, [0, 1], [0], [1.0])          # offsets too short
    with pytest.raises(ValueError):
        CsrMatrix(1, 1, [0, 2], [0], [1.0])          # last offset != nnz


# ---------------------------------------------------------------------------
# factorization and solves

def test_identity_solve():
    I = assemble_from_triplets(3, 3, [(i, i, 1.0) for i in range(3)])
    F = factorize(I)
    b = np.array([3.0, -1.0, 2.0])
    assert np.array_equal(F.solve(b), b)


def test_dirichlet_stiffness_matches_hand_elimination():
    # 1-D P1, a=1, two elements: eliminating the boundary rows leaves
    # 4 u_1 = 1/2, so the solution is [0, 1/8, 0]
    space = fe_space(uniform_interval(0, 1, 2), 1)
    A = assemble_diffusion(space, 1.0)
    Ad, rhs = apply_dirichlet(A, assemble_load(space, 1.0), space, symmetric=True)
    x = factorize(Ad).solve(rhs)
    assert np.allclose(x, [0.0, 0.125, 0.0], atol=1e-15)


def test_singular_matrix_reports_pivot_row():
    A = assemble_from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)])
    with pytest.raises(SingularMatrixError) as exc:
        factorize(A)
    assert exc.value.pivot_row == 1
    assert "pivot row 1" in str(exc.value)


def test_structurally_singular():
    A = assemble_from_triplets(3, 3, [(0, 0, 1.0), (1, 1, 1.0)])   # empty last row
    with pytest.raises(SingularMatrixError):
        factorize(A)


def test_nonsquare_rejected():
    A = assemble_from_triplets(2, 3, [(0, 0, 1.0)])
    with pytest.raises(ValueError):
        factorize(A)


def test_solve_many_single_column_degenerate():
    rng = np.random.default_rng(0)
    A = random_well_conditioned(6, rng)
    F = factorize(assemble_from_triplets(6, 6, _dense_triplets(A)))
    b = rng.standard_normal(6)
    assert np.array_equal(solve_many(F, b[:, None])[:, 0], F.solve(b))


def test_solve_many_linearity():
    rng = np.random.default_rng(1)
    A = random_well_conditioned(5, rng)
    F = factorize(assemble_from_triplets(5, 5, _dense_triplets(A)))
    b = rng.standard_normal(5)
    X = solve_many(F, np.column_stack([b, 2 * b]))
    assert np.allclose(X[:, 1], 2 * X[:, 0], rtol=1e-13)


def test_solve_many_matches_dense_oracle():
    rng = np.random.default_rng(2)
    A = random_well_conditioned(10, rng)
    B = rng.standard_normal((10, 4))
    F = factorize(assemble_from_triplets(10, 10, _dense_triplets(A)))
    X = solve_many(F, B)
    for j in range(4):
        assert np.allclose(X[:, j], dense_gauss_solve(A, B[:, j]), atol=1e-11)


def test_solve_many_dimension_mismatch():
    F = factorize(assemble_from_triplets(3, 3, [(i, i, 2.0) for i in range(3)]))
    with pytest.raises(ValueError):
        solve_many(F, np.ones((4, 2)))


@settings(deadline=None, max_examples=30)
@given(st.integers(2, 25), st.integers(1, 6), st.integers(0, 10_000))
def test_batched_solves_bit_identical_to_single(n, ncols, seed):
    rng = np.random.default_rng(seed)
    A = random_well_conditioned(n, rng)
    F = factorize(assemble_from_triplets(n, n, _dense_triplets(A)))
    B = rng.standard_normal((n, ncols))
    X = solve_many(F, B)
    for j in range(ncols):
        assert np.array_equal(X[:, j], F.solve(B[:, j]))


@settings(deadline=None, max_examples=30)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_residual_invariant(n, seed):
    rng = np.random.default_rng(seed)
    A = random_well_conditioned(n, rng)
    Am = assemble_from_triplets(n, n, _dense_triplets(A))
    b = rng.standard_normal(n)
    x = factorize(Am).solve(b)
    resid = np.abs(A @ x - b).max()
    scale = np.abs(A).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max()
    assert resid <= 1e-10 * scale


def test_factorization_not_mutated_by_solves():
    rng = np.random.default_rng(3)
    A = random_well_conditioned(8, rng)
    F = factorize(assemble_from_triplets(8, 8, _dense_triplets(A)))
    b = rng.standard_normal(8)
    first = F.solve(b)
    for _ in range(5):
        F.solve(rng.standard_normal(8))
    assert np.array_equal(F.solve(b), first)


# ---------------------------------------------------------------------------
# matrix-vector products

def test_spmv_identity_and_zero():
    I = assemble_from_triplets(3, 3, [(i, i, 1.0) for i in range(3)])
    x = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(spmv(I, x), x)
    Z = assemble_from_triplets(3, 3, [])
    assert np.all(spmv(Z, x) == 0)


def test_spmv_small_example():
    A = assemble_from_triplets(2, 2, [(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 4.0)])
    assert np.array_equal(spmv(A, np.ones(2)), [3.0, 7.0])
    with pytest.raises(ValueError):
        spmv(A, np.ones(3))


# ---------------------------------------------------------------------------
# speedup formula

def test_speedup_single_problem_single_solve():
    assert estimate_speedup(100, 1, 1, 1.5, 50.0) == pytest.approx(1.0, rel=1e-15)


def test_speedup_large_n_limit_scales_as_j():
    # build cost dwarfing the solves: the factor approaches J
    J, K, Cs = 7, 5, 3.0
    N = (1e6 * J * K * Cs) ** (1 / 1.5)
    sf = estimate_speedup(N, J, K, 1.5, Cs)
    assert abs(sf - J) / J < 0.01


def test_speedup_large_j_limit():
    N, K, Cs, p = 500.0, 4, 7.0, 1.5
    sf = estimate_speedup(N, 1e12, K, p, Cs)
    limit = (1 + Cs * N**-p) / (K * Cs * N**-p)
    assert sf == pytest.approx(limit, rel=1e-9)


def test_speedup_rejects_nonpositive():
    with pytest.raises(ValueError):
        estimate_speedup(0, 1, 1, 1.5, 1.0)


def test_matrix_dump_coordinate_format():
    A = assemble_from_triplets(2, 2, [(1, 0, 5.0), (0, 1, 7.0)])
    lines = A.dump_text().strip().splitlines()
    assert lines[0].split() == ["0", "1", "7.0"]
    assert lines[1].split() == ["1", "0", "5.0"]


def _dense_triplets(A):
    rows, cols = np.nonzero(A)
    return list(zip(rows.tolist(), cols.tolist(), A[rows, cols].tolist()))
