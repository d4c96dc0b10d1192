"""Cotangent Laplacian pieces and the discrete biharmonic operator."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .numerics import as_sparse_sym


class DegenerateFace(ValueError):
    """A triangle angle has a non-finite cotangent."""


class ZeroMass(ValueError):
    """A vertex has non-positive lumped mass."""


@dataclass(frozen=True)
class LaplacianParts:
    """Lumped masses ``D_diag``, weighted adjacency ``A`` and its row sums ``V_diag``."""

    D_diag: np.ndarray
    A: sparse.csr_matrix
    V_diag: np.ndarray

    @classmethod
    def from_adjacency(cls, A, D_diag=None):
        A = as_sparse_sym(A)
        V_diag = np.asarray(A.sum(axis=1)).ravel()
        if D_diag is None:
            D_diag = np.ones(A.shape[0])
        return cls(np.asarray(D_diag, dtype=np.float64), A, V_diag)

    @property
    def laplacian(self):
        """``V - A`` as CSR."""
        return (sparse.diags(self.V_diag) - self.A).tocsr()


def _face_cotangents(vertices, faces):
    """Cotangent of the angle at each corner, shape (t, 3)."""
    v = vertices
    cots = np.empty(faces.shape)
    for k in range(3):
        a = v[faces[:, k]]
        b = v[faces[:, (k + 1) % 3]]
        c = v[faces[:, (k + 2) % 3]]
        u, w = b - a, c - a
        with np.errstate(divide="ignore", invalid="ignore"):
            cots[:, k] = np.einsum("ij,ij->i", u, w) / np.linalg.norm(np.cross(u, w), axis=1)
    if not np.all(np.isfinite(cots)):
        bad = int(np.argmax(~np.all(np.isfinite(cots), axis=1)))
        raise DegenerateFace(f"face {bad} has a non-finite cotangent")
    return cots


def cotan_adjacency(mesh):
    """Cotangent weights ``A[i, j] = (cot(alpha) + cot(beta)) / 2``.

    ``alpha`` and ``beta`` are the angles opposite edge ``(i, j)``. A boundary
    edge has one opposite angle and gets half its cotangent. Obtuse angles
    give negative weights, which are kept.
    """
    f = mesh.faces
    n = mesh.n_vertices
    cots = _face_cotangents(mesh.vertices, f)
    # corner k is opposite the edge (k+1, k+2)
    rows, cols, vals = [], [], []
    for k in range(3):
        i = f[:, (k + 1) % 3]
        j = f[:, (k + 2) % 3]
        w = 0.5 * cots[:, k]
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    A = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
    return as_sparse_sym(A, check=False)


def lumped_mass(mesh):
    """One third of the total area of the triangles incident on each vertex."""
    areas = mesh.face_areas
    D = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(D, mesh.faces[:, k], areas / 3.0)
    return D


def laplacian_parts(mesh):
    A = cotan_adjacency(mesh)
    D = lumped_mass(mesh)
    V = np.asarray(A.sum(axis=1)).ravel()
    return LaplacianParts(D, A, V)


class BiharmonicOp:
    """Sparse biharmonic operator ``M`` with landmark block extraction.

    Parameters
    ----------
    M : sparse matrix, shape (n, n)
        Symmetric positive semi-definite.
    """

    def __init__(self, M):
        self.M = as_sparse_sym(M, check=False)

    @property
    def n(self):
        return self.M.shape[0]

    def partition(self, landmarks):
        """Index arrays ``(b, u)``: landmarks in the given order and the sorted rest."""
        b = np.asarray(landmarks, dtype=np.int64)
        mask = np.ones(self.n, dtype=bool)
        mask[b] = False
        return b, np.flatnonzero(mask)

    def blocks(self, landmarks):
        """Return ``M_bb, M_bu, M_ub, M_uu`` for the given landmark order."""
        b, u = self.partition(landmarks)
        Mb = self.M[b]
        Mu = self.M[u]
        return (Mb[:, b].tocsr(), Mb[:, u].tocsr(), Mu[:, b].tocsc(), Mu[:, u].tocsr())

    def __matmul__(self, x):
        return self.M @ x


def biharmonic_operator(parts):
    """Assemble ``M = (V - A)^T D^{-1} (V - A)`` as a sparse matrix.

    ``V - A`` is symmetric so the transpose is a no-op.
    """
    D = np.asarray(parts.D_diag, dtype=np.float64)
    if np.any(~(D > 0)):
        raise ZeroMass(f"vertex {int(np.argmax(~(D > 0)))} has non-positive lumped mass")
    L = parts.laplacian
    M = L.T @ sparse.diags(1.0 / D) @ L
    M = sparse.csr_matrix(M)
    # Exact symmetry: the triple product can differ in the last bit across
    # (i, j) and (j, i) depending on summation order.
    M = 0.5 * (M + M.T)
    return BiharmonicOp(M)


def mesh_biharmonic(mesh):
    """Biharmonic operator of a triangle mesh from cotangent weights and lumped masses."""
    return biharmonic_operator(laplacian_parts(mesh))


def graph_biharmonic(adjacency):
    """Biharmonic operator of a graph: ``D = I`` and ``A`` the 0/1 adjacency."""
    A = sparse.csr_matrix(adjacency, dtype=np.float64)
    if np.any(A.diagonal() != 0):
        raise ValueError("adjacency must not contain self-loops")
    A = as_sparse_sym(A)
    parts = LaplacianParts.from_adjacency(A)
    L = parts.laplacian
    return BiharmonicOp(L @ L)
