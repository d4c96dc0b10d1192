"""Geodesic distance rows computed on demand with Dijkstra on the edge graph."""

from concurrent.futures import ThreadPoolExecutor
import os
import warnings

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .mesh import TriMesh


class DisconnectedError(RuntimeError):
    """Some vertices cannot be reached from a source."""


class DisconnectedWarning(RuntimeWarning):
    pass


def snap_to_dyadic_grid(weights, total):
    """Round positive ``weights`` to multiples of a power of two.

    The grid step is chosen so that any sum of weights not exceeding
    ``total`` is an integer multiple of the step below ``2**52`` steps, so
    every path length is computed exactly in float64 regardless of summation
    order.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if total <= 0:
        return weights.copy()
    step = 2.0 ** (int(np.ceil(np.log2(total))) - 52)
    snapped = np.round(weights / step) * step
    return np.maximum(snapped, step)


class DistanceOracle:
    """Rows of the geodesic distance matrix, computed on request.

    Nothing is cached: each call runs single-source shortest paths on the
    weighted edge graph. Distances are float64.

    Parameters
    ----------
    source : TriMesh or sparse matrix
        A mesh (edge weights are Euclidean edge lengths) or a symmetric
        weighted adjacency matrix.
    exact_sums : bool
        Snap edge weights with :func:`snap_to_dyadic_grid` (relative change
        below ``1e-10`` on practical meshes). Path sums are then exact, so
        ``row(i)[j] == row(j)[i]`` holds bit for bit.
    workers : int or None
        Threads used by :meth:`distance_submatrix`; ``None`` uses all cores.
        Rows are independent, so the result does not depend on this.
    """

    backend = "edge-dijkstra"

    def __init__(self, source, exact_sums=True, workers=1):
        if isinstance(source, TriMesh):
            graph = source.adjacency(weighted=True)
        else:
            graph = sparse.csr_matrix(source, dtype=np.float64)
            if graph.shape[0] != graph.shape[1]:
                raise ValueError("adjacency must be square")
            if (abs(graph - graph.T) > 0).nnz:
                raise ValueError("adjacency must be symmetric")
        graph = graph.copy()
        graph.eliminate_zeros()
        if graph.nnz and graph.data.min() <= 0:
            raise ValueError("edge weights must be positive")
        if exact_sums and graph.nnz:
            graph.data = snap_to_dyadic_grid(graph.data, graph.data.sum() / 2.0)
        self.graph = graph
        self.n = graph.shape[0]
        self.disconnected = False
        self.workers = workers or os.cpu_count() or 1

    def _check(self, D):
        if not np.all(np.isfinite(D)):
            self.disconnected = True
            warnings.warn("some vertices are unreachable; their distances are +inf",
                          DisconnectedWarning, stacklevel=3)
        return D

    def distance_row(self, i):
        """Distances from vertex ``i`` to every vertex, shape (n,)."""
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"vertex {i} out of range [0, {self.n})")
        D = csgraph.dijkstra(self.graph, directed=False, indices=i)
        return self._check(D)

    def distance_submatrix(self, rows, chunk=256):
        """Stack of :meth:`distance_row` for every index in ``rows``, shape (len(rows), n)."""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        if rows.size and (rows.min() < 0 or rows.max() >= self.n):
            raise IndexError(f"row index out of range [0, {self.n})")
        out = np.empty((len(rows), self.n))

        def run(start):
            sl = slice(start, start + chunk)
            out[sl] = csgraph.dijkstra(self.graph, directed=False, indices=rows[sl])

        starts = range(0, len(rows), chunk)
        if self.workers > 1 and len(rows) > chunk:
            with ThreadPoolExecutor(self.workers) as pool:
                list(pool.map(run, starts))
        else:
            for start in starts:
                run(start)
        return self._check(out)

    def full_matrix(self):
        """All-pairs distances. Only for small ``n``."""
        return self.distance_submatrix(np.arange(self.n))
