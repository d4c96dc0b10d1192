import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from sbha.numerics import (NonConvergence, NonSymmetric, SingularOperator, SolveConfig,
                           as_sparse_sym, dense_eig_sym, is_structurally_symmetric,
                           lanczos_topk, solve_spd, thin_qr)


def gaussian_elimination(A, B):
    """Dense solve with partial pivoting, written out by hand."""
    A = np.array(A, dtype=float)
    B = np.array(B, dtype=float)
    n = len(A)
    for k in range(n):
        piv = k + np.argmax(np.abs(A[k:, k]))
        A[[k, piv]] = A[[piv, k]]
        B[[k, piv]] = B[[piv, k]]
        for i in range(k + 1, n):
            f = A[i, k] / A[k, k]
            A[i, k:] -= f * A[k, k:]
            B[i] -= f * B[k]
    X = np.zeros_like(B)
    for i in range(n - 1, -1, -1):
        X[i] = (B[i] - A[i, i + 1:] @ X[i + 1:]) / A[i, i]
    return X


def grid_laplacian(nx, ny):
    idx = np.arange(nx * ny).reshape(ny, nx)
    edges = np.concatenate([
        np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1),
        np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1),
    ])
    n = nx * ny
    A = sparse.coo_matrix((np.ones(2 * len(edges)),
                           (np.r_[edges[:, 0], edges[:, 1]], np.r_[edges[:, 1], edges[:, 0]])),
                          shape=(n, n)).tocsr()
    return sparse.diags(np.asarray(A.sum(axis=1)).ravel()) - A


class TestSolveSpd:
    def test_identity(self, rng):
        B = rng.standard_normal((5, 3))
        np.testing.assert_array_equal(solve_spd(sparse.identity(5), B), B)

    def test_diagonal(self):
        X = solve_spd(sparse.diags([2.0, 2.0, 2.0]), np.ones(3))
        np.testing.assert_array_equal(X, 0.5 * np.ones(3))

    @pytest.mark.parametrize("method", ["cholesky", "cg"])
    def test_grid_biharmonic_matches_elimination(self, rng, method):
        L = grid_laplacian(7, 7)
        A = (L @ L + 1e-3 * sparse.identity(49)).tocsr()
        B = rng.standard_normal((49, 4))
        X = solve_spd(A, B, SolveConfig(method=method))
        expected = gaussian_elimination(A.toarray(), B)
        np.testing.assert_allclose(X, expected, atol=1e-6, rtol=0)
        assert np.linalg.norm(A @ X - B) / np.linalg.norm(B) <= 1e-8

    def test_sparse_rhs_and_vector(self, rng):
        A = sparse.diags(np.arange(1.0, 6.0))
        B = sparse.csc_matrix(np.eye(5)[:, :2])
        np.testing.assert_allclose(solve_spd(A, B), np.eye(5)[:, :2] / np.arange(1.0, 6.0)[:, None])
        assert solve_spd(A, np.ones(5)).shape == (5,)

    def test_singular_laplacian_is_regularized(self):
        L = grid_laplacian(3, 3).tocsr()
        b = np.zeros(9)
        b[0], b[-1] = 1.0, -1.0  # consistent right-hand side
        with pytest.warns(RuntimeWarning, match="diagonal shift"):
            X = solve_spd(L, b, SolveConfig(rel_residual_tol=1e-6))
        assert np.linalg.norm(L @ X - b) < 1e-5

    def test_zero_matrix_raises(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(SingularOperator):
                solve_spd(sparse.csr_matrix((4, 4)), np.ones(4))

    def test_cg_nonconvergence(self, rng):
        L = grid_laplacian(7, 7)
        A = (L @ L + 1e-3 * sparse.identity(49)).tocsr()
        with pytest.raises(NonConvergence):
            solve_spd(A, rng.standard_normal(49), SolveConfig(method="cg", max_iters=2))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolveConfig(method="qr")
        with pytest.raises(ValueError):
            SolveConfig(rel_residual_tol=0)
        with pytest.raises(ValueError):
            SolveConfig(max_iters=0)


class TestLanczos:
    def test_diagonal(self):
        d = np.array([5.0, 4, 3, 2, 1])
        vals, vecs = lanczos_topk(lambda x: d * x, 5, 2)
        np.testing.assert_allclose(vals, [5, 4], rtol=1e-12)
        np.testing.assert_allclose(np.abs(vecs), np.eye(5)[:, :2], atol=1e-8)

    def test_collinear_points_operator(self):
        x = np.arange(4.0)
        E = (x[:, None] - x[None, :]) ** 2
        J = np.eye(4) - 1 / 4
        B = -0.5 * J @ E @ J
        vals, vecs = lanczos_topk(lambda v: B @ v, 4, 1)
        w, V = np.linalg.eigh(B)
        np.testing.assert_allclose(vals[0], w[-1], rtol=1e-8)
        assert abs(abs(vecs[:, 0] @ V[:, -1]) - 1) < 1e-8

    def test_identity(self):
        vals, vecs = lanczos_topk(lambda x: x, 10, 3)
        np.testing.assert_allclose(vals, 1.0, rtol=1e-12)
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-10)

    def test_bad_k(self):
        with pytest.raises(ValueError):
            lanczos_topk(lambda x: x, 4, 4)

    def test_nonconvergence(self, rng):
        A = rng.standard_normal((300, 300))
        A = A + A.T
        with pytest.raises(NonConvergence):
            lanczos_topk(lambda x: A @ x, 300, 5, tol=1e-14, max_iters=1, ncv=11)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(6, 200), k=st.integers(1, 5), seed=st.integers(0, 2 ** 16))
    def test_matches_dense(self, n, k, seed):
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((n, n))
        A = A + A.T
        vals, vecs = lanczos_topk(lambda x: A @ x, n, k, tol=1e-10, max_iters=200)
        ref, _ = dense_eig_sym(A)
        np.testing.assert_allclose(vals, ref[:k], rtol=1e-6, atol=1e-6 * abs(ref).max())
        np.testing.assert_allclose(vecs.T @ vecs, np.eye(k), atol=1e-10)
        resid = np.linalg.norm(A @ vecs - vecs * vals, axis=0)
        assert np.all(resid <= 1e-8 * abs(ref).max())


class TestDenseEig:
    def test_diagonal(self):
        vals, vecs = dense_eig_sym(np.diag([3.0, 1.0]))
        np.testing.assert_array_equal(vals, [3, 1])
        np.testing.assert_array_equal(np.abs(vecs), np.eye(2))

    def test_exchange(self):
        vals, _ = dense_eig_sym(np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(vals, [1, -1], atol=1e-15)

    def test_reconstruction(self, rng):
        S = rng.standard_normal((8, 8))
        S = S + S.T
        vals, V = dense_eig_sym(S)
        assert np.linalg.norm(V * vals @ V.T - S) <= 1e-10 * np.linalg.norm(S)
        assert np.linalg.norm(V.T @ V - np.eye(8)) <= 1e-12
        assert np.all(np.diff(vals) <= 0)

    def test_nonsymmetric(self):
        with pytest.raises(NonSymmetric):
            dense_eig_sym(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestThinQR:
    def test_orthonormal_input(self, rng):
        A, _ = np.linalg.qr(rng.standard_normal((6, 3)))
        Q, R = thin_qr(A)
        np.testing.assert_allclose(np.abs(R), np.eye(3), atol=1e-12)
        np.testing.assert_allclose(np.abs(Q), np.abs(A), atol=1e-12)

    def test_ones_column(self):
        Q, R = thin_qr(np.ones((4, 1)))
        np.testing.assert_allclose(np.abs(R), [[2.0]])
        np.testing.assert_allclose(np.abs(Q), 0.5)

    def test_reconstruction(self, rng):
        A = rng.standard_normal((20, 5))
        Q, R = thin_qr(A)
        assert np.linalg.norm(Q @ R - A) <= 1e-10 * np.linalg.norm(A)
        assert np.allclose(np.triu(R), R)

    def test_rank_deficient(self):
        A = np.ones((5, 2))
        Q, R = thin_qr(A)
        np.testing.assert_allclose(Q @ R, A, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 40), l=st.integers(1, 10), seed=st.integers(0, 2 ** 16))
    def test_orthonormal_property(self, n, l, seed):
        if l > n:
            l = n
        A = np.random.default_rng(seed).standard_normal((n, l))
        Q, R = thin_qr(A)
        assert np.linalg.norm(Q.T @ Q - np.eye(l)) <= 1e-10

    def test_wide_rejected(self):
        with pytest.raises(ValueError):
            thin_qr(np.ones((2, 3)))


def test_sparse_sym_canonical():
    A = sparse.coo_matrix(([1.0, 1.0, 0.0, 2.0], ([0, 1, 0, 1], [1, 0, 0, 1])), shape=(2, 2))
    S = as_sparse_sym(A)
    assert S.nnz == 3
    assert is_structurally_symmetric(S, values=True)
    with pytest.raises(NonSymmetric):
        as_sparse_sym(sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]])))
