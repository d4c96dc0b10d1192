import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sbha.approx import (BhaApprox, InterpOperator, bha, interpolation_operator, select_landmarks,
                         sparse_interpolation_operator)
from sbha.geodesic import DistanceOracle
from sbha.laplacian import mesh_biharmonic
from sbha.mds import (CenteringOperator, Embedding, bmds, double_center, mds_exact,
                      relative_error, sample_rows, sbmds, sbmds_matvec, stress)


def sq_dists(X):
    X = np.asarray(X, dtype=float)
    return ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)


def dist_rel_diff(Z1, Z2):
    D1 = Embedding(Z1, np.zeros(Z1.shape[1]), "x").pairwise_distances()
    D2 = Embedding(Z2, np.zeros(Z2.shape[1]), "x").pairwise_distances()
    return np.linalg.norm(D1 - D2) / np.linalg.norm(D2)


@pytest.fixture(scope="module")
def s2_approx(sphere2, sphere2_M):
    oracle = DistanceOracle(sphere2)
    lm = select_landmarks(oracle, 40)
    return bha(interpolation_operator(sphere2_M, lm), lm, squared=True), oracle, lm


class TestExact:
    def test_collinear(self):
        emb = mds_exact(sq_dists([[0], [1], [2]]), 1)
        z = emb.Z[:, 0] * np.sign(emb.Z[2, 0])
        np.testing.assert_allclose(z, [-1, 0, 1], atol=1e-12)
        np.testing.assert_allclose(emb.eigenvalues, [2.0], rtol=1e-12)

    def test_zero(self):
        emb = mds_exact(np.zeros((4, 4)), 2)
        np.testing.assert_allclose(emb.Z, 0.0, atol=1e-15)

    def test_square(self):
        X = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        emb = mds_exact(sq_dists(X), 2)
        np.testing.assert_allclose(emb.pairwise_distances(), np.sqrt(sq_dists(X)), atol=1e-10)

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(4, 30), d=st.integers(1, 3), seed=st.integers(0, 9999))
    def test_reproduces_euclidean_points(self, n, d, seed):
        X = np.random.default_rng(seed).standard_normal((n, d))
        emb = mds_exact(sq_dists(X), d)
        D = np.sqrt(sq_dists(X))
        assert np.linalg.norm(emb.pairwise_distances() - D) <= 1e-8 * np.linalg.norm(D)
        assert stress(emb, sq_dists(X)) <= 1e-8 * np.sum(double_center(sq_dists(X)) ** 2) + 1e-20

    def test_negative_eigenvalues_zeroed(self):
        # four points with one pair much farther than metric embedding allows
        E = np.array([[0, 1, 1, 9], [1, 0, 1, 1], [1, 1, 0, 1], [9, 1, 1, 0]], dtype=float)
        vals = np.linalg.eigvalsh(double_center(E))
        assert vals.min() < 0
        with pytest.warns(RuntimeWarning, match="negative"):
            emb = mds_exact(E, 4)
        assert emb.negative.any()
        np.testing.assert_array_equal(emb.Z[:, emb.negative], 0.0)
        assert np.all(np.diff(emb.eigenvalues) <= 0)


def test_centering_operator():
    J = CenteringOperator(5)
    np.testing.assert_allclose(J @ np.ones(5), 0.0, atol=1e-12)
    x = np.arange(5.0)
    np.testing.assert_allclose(J @ x, (np.eye(5) - 1 / 5) @ x, atol=1e-14)


class TestFactored:
    def test_bmds_all_landmarks_equals_exact(self, sphere1):
        oracle = DistanceOracle(sphere1)
        lm = select_landmarks(oracle, sphere1.n_vertices)
        A = bha(interpolation_operator(mesh_biharmonic(sphere1), lm), lm, squared=True)
        a = bmds(A, 3)
        b = mds_exact(oracle.full_matrix() ** 2, 3)
        assert dist_rel_diff(a.Z, b.Z) <= 1e-8
        np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-8)

    def test_bmds_centered(self, s2_approx):
        A, _, _ = s2_approx
        Z = bmds(A, 3).Z
        assert np.abs(Z.mean(axis=0)).max() <= 1e-8 * np.abs(Z).max()

    def test_matvec_column(self, s2_approx):
        A, _, _ = s2_approx
        n = A.n
        e1 = np.zeros(n)
        e1[0] = 1.0
        J = np.eye(n) - 1 / n
        B = -0.5 * J @ A.toarray() @ J
        np.testing.assert_allclose(sbmds_matvec(A)(e1), B[:, 0], atol=1e-10 * np.abs(B).max())

    def test_sbmds_agrees_with_bmds(self, s2_approx):
        A, _, _ = s2_approx
        a, b = bmds(A, 3), sbmds(A, 3)
        np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, rtol=1e-6)
        assert dist_rel_diff(b.Z, a.Z) <= 1e-6
        assert abs(stress(a, A) - stress(b, A)) <= 1e-8 * max(stress(a, A), 1.0)

    def test_sparse_operator_paths_agree(self, sphere2, sphere2_M):
        oracle = DistanceOracle(sphere2)
        lm = select_landmarks(oracle, 40)
        A = bha(sparse_interpolation_operator(sphere2_M, lm, 10), lm, squared=True)
        a, b = bmds(A, 3), sbmds(A, 3)
        np.testing.assert_allclose(b.eigenvalues, a.eigenvalues, rtol=1e-6)
        assert dist_rel_diff(b.Z, a.Z) <= 1e-6

    def test_rank_m_euclidean(self, rng):
        # l = n with Euclidean squared distances: the factored source is exact
        X = rng.standard_normal((30, 2))
        E = sq_dists(X)
        A = BhaApprox(InterpOperator(np.eye(30), np.arange(30)), E, squared=True)
        emb = sbmds(A, 2)
        assert stress(emb, A) <= 1e-8 * np.sum(double_center(E) ** 2)

    def test_requires_squared(self, s2_approx):
        A, _, lm = s2_approx
        plain = bha(A.P, lm)
        with pytest.raises(ValueError, match="squared"):
            bmds(plain, 3)
        with pytest.raises(ValueError, match="squared"):
            sbmds(plain, 3)


class TestStress:
    def test_zero_embedding(self, sphere2_K):
        E = sphere2_K ** 2
        Z = np.zeros((len(E), 3))
        assert stress(Z, E) == pytest.approx(np.sum((0.5 * (E - E.mean(0) - E.mean(1)[:, None] + E.mean())) ** 2),
                                             rel=1e-12)

    def test_factored_matches_dense(self, s2_approx, rng):
        A, _, _ = s2_approx
        Z = rng.standard_normal((A.n, 3))
        assert stress(Z, A) == pytest.approx(stress(Z, A.toarray()), rel=1e-9)

    def test_bmds_beats_zero(self, s2_approx, sphere2_K):
        A, _, _ = s2_approx
        emb = bmds(A, 3)
        assert stress(emb, A) <= stress(np.zeros_like(emb.Z), A)
        E = sphere2_K ** 2
        exact = mds_exact(E, 3)
        assert stress(exact, E) <= stress(np.zeros_like(exact.Z), E)

    def test_sample_all_rows_equals_dense(self, s2_approx, sphere2_K):
        A, oracle, _ = s2_approx
        emb = bmds(A, 3)
        sample = sample_rows(oracle, oracle.n + 5, seed=1)
        assert stress(emb, sample) == stress(emb, sphere2_K ** 2)

    def test_sampled_estimate_is_close(self, s2_approx, sphere2_K):
        A, oracle, _ = s2_approx
        emb = bmds(A, 3)
        dense = stress(emb, sphere2_K ** 2)
        est = np.mean([stress(emb, sample_rows(oracle, 80, seed=s)) for s in range(10)])
        assert est == pytest.approx(dense, rel=0.2)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            stress(np.zeros((3, 1)), np.zeros((4, 4)))


class TestRelativeError:
    def test_exact_is_zero(self, sphere2_K):
        class Exact:
            def evaluate_rows(self, rows):
                return sphere2_K[rows]

        assert relative_error(Exact(), sphere2_K) == 0.0

    def test_zero_is_one(self, sphere2_K):
        class Zero:
            def evaluate_rows(self, rows):
                return np.zeros((len(rows), len(sphere2_K)))

        assert relative_error(Zero(), sphere2_K) == 1.0

    def test_sample_of_all_rows_matches_full(self, s2_approx, sphere2_K):
        A, oracle, lm = s2_approx
        plain = bha(A.P, lm)
        full = relative_error(plain, sphere2_K)
        assert relative_error(plain, sample_rows(oracle, oracle.n)) == full
        ref = np.sum((plain.toarray() - sphere2_K) ** 2) / np.sum(sphere2_K ** 2)
        assert full == pytest.approx(ref, rel=1e-10)

    def test_sample_is_seeded(self, s2_approx):
        _, oracle, _ = s2_approx
        a, b = sample_rows(oracle, 20, seed=4), sample_rows(oracle, 20, seed=4)
        np.testing.assert_array_equal(a.indices, b.indices)
        assert a.seed == 4 and a.size == 20
