import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from sbha.approx import select_landmarks
from sbha.geodesic import DisconnectedError, DisconnectedWarning, DistanceOracle, snap_to_dyadic_grid
from sbha.mesh import TriMesh, make_grid_mesh, make_sphere_mesh


def path_graph(weights):
    n = len(weights) + 1
    i = np.arange(n - 1)
    A = sparse.coo_matrix((np.r_[weights, weights], (np.r_[i, i + 1], np.r_[i + 1, i])), shape=(n, n))
    return A.tocsr()


def floyd_warshall(A):
    """All-pairs shortest paths by the textbook triple loop, vectorized over one index."""
    n = A.shape[0]
    dense = A.toarray()
    D = np.where(dense > 0, dense, np.inf)
    np.fill_diagonal(D, 0.0)
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D


def test_path_graph_distances():
    oracle = DistanceOracle(path_graph([1.0, 1.0, 1.0]))
    np.testing.assert_array_equal(oracle.distance_row(0), [0, 1, 2, 3])
    np.testing.assert_array_equal(oracle.distance_row(2), [2, 1, 0, 1])


def test_row_diagonal_zero(sphere2):
    oracle = DistanceOracle(sphere2)
    for i in (0, 17, 161):
        assert oracle.distance_row(i)[i] == 0.0


def test_rows_are_bit_symmetric(sphere3, rng):
    oracle = DistanceOracle(sphere3)
    for i, j in rng.integers(0, sphere3.n_vertices, size=(20, 2)):
        assert oracle.distance_row(i)[j] == oracle.distance_row(j)[i]


def test_full_matrix_exactly_symmetric(sphere2_K):
    np.testing.assert_array_equal(sphere2_K, sphere2_K.T)


def test_submatrix_shapes_and_rows(sphere1):
    oracle = DistanceOracle(sphere1)
    one = oracle.distance_submatrix([5])
    assert one.shape == (1, sphere1.n_vertices)
    np.testing.assert_array_equal(one[0], oracle.distance_row(5))
    assert oracle.distance_submatrix([]).shape == (0, sphere1.n_vertices)
    with pytest.raises(IndexError):
        oracle.distance_submatrix([sphere1.n_vertices])
    with pytest.raises(IndexError):
        oracle.distance_row(-1)


def test_grid_full_matrix_against_floyd_warshall():
    grid = make_grid_mesh(5, 10, 0.7)
    oracle = DistanceOracle(grid)
    K = oracle.full_matrix()
    assert K.shape == (50, 50)
    np.testing.assert_array_equal(K, K.T)
    ref = floyd_warshall(oracle.graph)
    np.testing.assert_array_equal(K, ref)


def test_workers_do_not_change_result(sphere2):
    rows = np.arange(0, sphere2.n_vertices, 3)
    a = DistanceOracle(sphere2, workers=1).distance_submatrix(rows, chunk=7)
    b = DistanceOracle(sphere2, workers=3).distance_submatrix(rows, chunk=7)
    np.testing.assert_array_equal(a, b)


def test_snapping_is_tiny(sphere3):
    raw = DistanceOracle(sphere3, exact_sums=False).distance_row(0)
    snapped = DistanceOracle(sphere3).distance_row(0)
    assert np.abs(raw - snapped).max() <= 1e-10 * raw.max()


def test_snap_grid():
    w = snap_to_dyadic_grid([0.1, 0.2, 0.3], 0.6)
    step = 2.0 ** (0 - 52)
    np.testing.assert_array_equal(w / step, np.round(w / step))
    assert w[0] + w[1] + w[2] == w[2] + w[1] + w[0]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=3, max_size=60), st.integers(0, 2 ** 16))
def test_random_graph_matches_floyd_warshall(weights, seed):
    rng = np.random.default_rng(seed)
    n = min(len(weights), 40)
    # random connected graph: a shuffled path plus a few chords
    perm = rng.permutation(n)
    edges = {tuple(sorted((perm[k], perm[k + 1]))) for k in range(n - 1)}
    for a, b in rng.integers(0, n, size=(n // 2, 2)):
        if a != b:
            edges.add((min(a, b), max(a, b)))
    edges = sorted(edges)
    w = np.resize(np.asarray(weights), len(edges))
    i, j = np.array(edges).T
    A = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
    oracle = DistanceOracle(A)
    K = oracle.full_matrix()
    np.testing.assert_array_equal(K, floyd_warshall(oracle.graph))
    np.testing.assert_array_equal(K, K.T)
    # triangle inequality holds exactly on the snapped grid
    assert np.all(K[:, :, None] <= K[:, None, :] + K.T[None, :, :])


def two_triangles():
    v = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 0], [6, 5, 0], [5, 6, 0]]
    return TriMesh(v, [[0, 1, 2], [3, 4, 5]])


def test_disconnected_mesh():
    oracle = DistanceOracle(two_triangles())
    with pytest.warns(DisconnectedWarning):
        row = oracle.distance_row(0)
    assert np.isinf(row[3:]).all() and np.isfinite(row[:3]).all()
    assert oracle.disconnected


def test_disconnected_landmarks_raise():
    oracle = DistanceOracle(two_triangles())
    with pytest.warns(DisconnectedWarning):
        with pytest.raises(DisconnectedError):
            select_landmarks(oracle, 3)


def test_bad_adjacency():
    with pytest.raises(ValueError):
        DistanceOracle(sparse.csr_matrix(np.array([[0, 1.0], [0, 0]])))
    with pytest.raises(ValueError):
        DistanceOracle(sparse.csr_matrix(np.array([[0, -1.0], [-1.0, 0]])))


def test_sphere_distances_exceed_chords():
    # a path of chords is never shorter than the straight chord
    m = make_sphere_mesh(4)
    d = DistanceOracle(m).distance_row(0)
    chord = np.linalg.norm(m.vertices - m.vertices[0], axis=1)
    assert np.all(d >= chord - 1e-12)
    assert d.max() <= 1.2 * np.pi
