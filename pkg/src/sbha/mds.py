"""Classical scaling on exact or factored squared-distance matrices.

Three solvers share one output type:

* :func:`mds_exact` eigendecomposes ``-1/2 J E J`` densely,
* :func:`bmds` reduces the factored problem to an ``l x l`` eigenproblem
  through a thin QR of ``J P``,
* :func:`sbmds` runs Lanczos on the operator ``v -> -1/2 J P W P^T J v``
  and never forms anything larger than a few length-``n`` vectors.
"""

from dataclasses import dataclass, field
import logging
import warnings

import numpy as np

from .numerics import dense_eig_sym, lanczos_topk, thin_qr

logger = logging.getLogger(__name__)


@dataclass
class Embedding:
    """MDS coordinates.

    Attributes
    ----------
    Z : ndarray, shape (n, m)
    eigenvalues : ndarray, shape (m,)
        Descending, before negative ones are zeroed.
    method : str
        ``"exact"``, ``"bmds"`` or ``"sbmds"``.
    negative : ndarray of bool, shape (m,)
        Components whose eigenvalue was negative; their coordinates are 0.
    """

    Z: np.ndarray
    eigenvalues: np.ndarray
    method: str
    negative: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.negative is None:
            self.negative = np.zeros(len(self.eigenvalues), dtype=bool)

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def m(self):
        return self.Z.shape[1]

    def pairwise_distances(self):
        """Euclidean distance matrix of the embedded points, shape (n, n)."""
        G = self.Z @ self.Z.T
        sq = np.diag(G)
        return np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2.0 * G, 0.0))


class CenteringOperator:
    """``J = I - (1/n) 1 1^T`` applied without forming it."""

    def __init__(self, n):
        self.n = n

    def __matmul__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x - x.mean(axis=0, keepdims=True)


def _embed(vals, vecs, method):
    neg = vals < 0
    if np.any(neg):
        warnings.warn(f"{int(neg.sum())} of the top {len(vals)} eigenvalues are negative; "
                      "their coordinates are set to zero", RuntimeWarning, stacklevel=3)
    Z = vecs * np.sqrt(np.where(neg, 0.0, vals))
    return Embedding(Z, vals, method, neg)


def double_center(E):
    """``-1/2 J E J`` for a dense matrix."""
    E = np.asarray(E, dtype=np.float64)
    row = E.mean(axis=1, keepdims=True)
    col = E.mean(axis=0, keepdims=True)
    return -0.5 * (E - row - col + E.mean())


def mds_exact(E, m):
    """Classical MDS of a dense squared-distance matrix ``E``."""
    E = np.asarray(E, dtype=np.float64)
    n = E.shape[0]
    if not 0 < m <= n:
        raise ValueError(f"need 0 < m <= n, got m={m}, n={n}")
    vals, vecs = dense_eig_sym(double_center(E))
    return _embed(vals[:m], vecs[:, :m], "exact")


def _require_squared(approx):
    if not getattr(approx, "squared", False):
        raise ValueError("MDS needs an approximation of squared distances; use approx.as_squared()")


def centered_operator(P):
    """Dense ``J P`` (column means removed)."""
    Pd = P.toarray()
    return Pd - Pd.mean(axis=0, keepdims=True)


def bmds(approx, m):
    """Classical MDS on ``P W P^T`` via the thin QR ``J P = Q R``.

    Memory is ``O(n l)`` for ``Q``.
    """
    _require_squared(approx)
    if not 0 < m <= approx.P.l:
        raise ValueError(f"need 0 < m <= l, got m={m}")
    Q, R = thin_qr(centered_operator(approx.P))
    S = -0.5 * (R @ approx.W @ R.T)
    S = 0.5 * (S + S.T)
    vals, vecs = dense_eig_sym(S)
    return _embed(vals[:m], Q @ vecs[:, :m], "bmds")


def sbmds_matvec(approx):
    """The map ``v -> -1/2 J P W P^T J v`` as a callable."""
    P, W = approx.P, approx.W

    def apply(v):
        v = v - v.mean()
        y = P.matvec(W @ P.rmatvec(v))
        return -0.5 * (y - y.mean())

    return apply


def sbmds(approx, m, tol=1e-10, max_iters=100, seed=0, ncv=None):
    """Classical MDS on ``P W P^T`` with matrix-free Lanczos.

    Each matvec centers, applies ``P^T``, ``W`` and ``P``, centers again and
    scales, so the extra memory is a few vectors of length ``n``.
    """
    _require_squared(approx)
    n = approx.n
    if not 0 < m < n:
        raise ValueError(f"need 0 < m < n, got m={m}, n={n}")
    vals, vecs = lanczos_topk(sbmds_matvec(approx), n, m, tol=tol, max_iters=max_iters,
                              seed=seed, ncv=ncv)
    return _embed(vals, vecs, "sbmds")


# ----------------------------------------------------------------------------
# quality metrics

@dataclass
class RowSample:
    """Exact distance rows for a random subset of vertices.

    Attributes
    ----------
    indices : ndarray of int, shape (s,)
    rows : ndarray, shape (s, n)
        Distance rows (not squared).
    seed : int or None
    """

    indices: np.ndarray
    rows: np.ndarray
    seed: int | None = None

    @property
    def size(self):
        return len(self.indices)

    @property
    def n(self):
        return self.rows.shape[1]


def sample_rows(oracle, size, seed=0):
    """Draw ``size`` distinct rows uniformly (all rows, in order, when ``size >= n``)."""
    n = oracle.n
    if size >= n:
        idx = np.arange(n)
    else:
        idx = np.sort(np.random.default_rng(seed).choice(n, size=size, replace=False))
    return RowSample(idx, oracle.distance_submatrix(idx), seed)


def relative_error(approx, reference):
    """``||K_hat - K||_F^2 / ||K||_F^2``.

    ``reference`` is either the full dense ``K`` or a :class:`RowSample`, in
    which case both norms are restricted to the sampled rows.
    """
    if isinstance(reference, RowSample):
        idx, K = reference.indices, reference.rows
    else:
        K = np.asarray(reference, dtype=np.float64)
        idx = np.arange(K.shape[0])
    num = 0.0
    den = 0.0
    for start in range(0, len(idx), 256):
        sl = slice(start, start + 256)
        Kh = approx.evaluate_rows(idx[sl])
        num += float(np.sum((Kh - K[sl]) ** 2))
        den += float(np.sum(K[sl] ** 2))
    return num / den if den > 0 else (0.0 if num == 0 else np.inf)


def _Z(embedding):
    return embedding.Z if isinstance(embedding, Embedding) else np.asarray(embedding, dtype=np.float64)


def _stress_factored(Z, approx):
    # ||Z Z^T - B||_F^2 with B = -1/2 (JP) W (JP)^T, expanded so nothing n x n appears.
    _require_squared(approx)
    P, W = approx.P, approx.W
    n = P.n
    ones = np.ones(n)
    s = P.rmatvec(ones)
    G = _gram(P) - np.outer(s, s) / n
    Zc = Z - Z.mean(axis=0, keepdims=True)
    PtJZ = np.asarray(P.rmatvec(Zc))
    ZtZ = Z.T @ Z
    zz = float(np.sum(ZtZ * ZtZ))
    cross = -0.5 * float(np.sum(PtJZ * (W @ PtJZ)))
    bb = 0.25 * float(np.sum((W @ G) * (W @ G).T))
    return zz - 2.0 * cross + bb


def _gram(P):
    if P.is_sparse:
        return (P.full.T @ P.full).toarray()
    return P.full.T @ P.full


def stress(embedding, source):
    """Classical-scaling stress ``||Z Z^T + 1/2 J E J||_F^2``.

    Parameters
    ----------
    embedding : Embedding or ndarray, shape (n, m)
    source : ndarray, BhaApprox or RowSample
        Dense squared distances ``E``; a squared factored approximation
        (evaluated exactly without forming ``n x n`` matrices); or a row
        sample of exact distances, giving the estimate
        ``(n / s) * sum over sampled rows``. Column means of ``E`` are then
        estimated from the sampled rows, so the estimate is exact when every
        row is sampled.
    """
    Z = _Z(embedding)
    if isinstance(source, RowSample):
        return _stress_sampled(Z, source)
    if hasattr(source, "P") and hasattr(source, "W"):
        return _stress_factored(Z, source)
    E = np.asarray(source, dtype=np.float64)
    if E.shape[0] != Z.shape[0]:
        raise ValueError("embedding and distance matrix sizes differ")
    return float(np.sum((Z @ Z.T - double_center(E)) ** 2))


def _stress_sampled(Z, sample):
    n = sample.n
    if Z.shape[0] != n:
        raise ValueError("embedding and sample sizes differ")
    E_s = sample.rows ** 2
    if sample.size == n and np.array_equal(sample.indices, np.arange(n)):
        return float(np.sum((Z @ Z.T - double_center(E_s)) ** 2))
    col_mean = E_s.mean(axis=0)           # estimates the row means by symmetry
    grand = col_mean.mean()
    row_mean = E_s.mean(axis=1, keepdims=True)
    B_s = -0.5 * (E_s - row_mean - col_mean[None, :] + grand)
    R = Z[sample.indices] @ Z.T - B_s
    return float(np.sum(R ** 2) * n / sample.size)
