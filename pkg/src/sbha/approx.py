"""Landmark-based low-rank approximations of geodesic distance matrices.

The biharmonic approximation represents the distance matrix as
``K_hat = P W P^T`` where ``W`` holds landmark-to-landmark distances and
``P`` interpolates landmark values to every vertex by solving a biharmonic
Dirichlet problem. Thresholding each column of ``P`` gives the sparse
variant. Nystrom and the FMDS interpolation transform are kept alongside
for comparison.
"""

from dataclasses import dataclass
import math
import time

import numpy as np
import scipy.linalg
from scipy import sparse

from .geodesic import DisconnectedError
from .numerics import SingularOperator, SolveConfig, factorize_spd, solve_spd


@dataclass
class LandmarkSet:
    """Ordered landmarks with their full distance rows.

    Attributes
    ----------
    indices : ndarray of int, shape (l,)
    rows : ndarray, shape (l, n)
        ``rows[t]`` is the distance row of ``indices[t]``.
    min_dist : ndarray, shape (n,)
        Distance from each vertex to its nearest landmark.
    seed : int or None
        Seed used to draw the first landmark, if it was drawn at random.
    """

    indices: np.ndarray
    rows: np.ndarray
    min_dist: np.ndarray
    seed: int | None = None

    def __len__(self):
        return len(self.indices)

    @property
    def n(self):
        return self.rows.shape[1]

    def landmark_block(self):
        """``W[i, j] = d(b_i, b_j)``, shape (l, l)."""
        return self.rows[:, self.indices]


def select_landmarks(oracle, l, first=0, seed=None):
    """Farthest point sampling.

    Each new landmark is the vertex with the largest distance to its nearest
    current landmark; ties go to the lowest vertex index. Exactly ``l``
    distance rows are requested from ``oracle``.

    Parameters
    ----------
    oracle : DistanceOracle
    l : int
        Number of landmarks, ``1 <= l <= n``.
    first : int or None
        First landmark. ``None`` draws it uniformly with ``seed``.
    seed : int, optional
    """
    n = oracle.n
    if not 1 <= l <= n:
        raise ValueError(f"need 1 <= l <= n, got l={l}, n={n}")
    drawn = first is None
    if drawn:
        first = int(np.random.default_rng(seed).integers(n))
    elif not 0 <= first < n:
        raise IndexError(f"first landmark {first} out of range")

    indices = np.empty(l, dtype=np.int64)
    rows = np.empty((l, n))
    indices[0] = first
    rows[0] = oracle.distance_row(first)
    min_dist = rows[0].copy()
    for t in range(1, l):
        if not np.all(np.isfinite(min_dist)):
            raise DisconnectedError("mesh is disconnected; farthest point sampling is undefined")
        nxt = int(np.argmax(min_dist))
        indices[t] = nxt
        rows[t] = oracle.distance_row(nxt)
        np.minimum(min_dist, rows[t], out=min_dist)
    if not np.all(np.isfinite(min_dist)):
        raise DisconnectedError("mesh is disconnected; farthest point sampling is undefined")
    return LandmarkSet(indices, rows, min_dist, seed=seed if drawn else None)


class InterpOperator:
    """The ``n x l`` interpolation operator ``P``.

    Rows at landmark ``indices[t]`` are the standard basis row ``e_t``; the
    remaining rows (``P_u``, in ascending vertex order) hold interpolation
    weights. ``P`` is kept whole, as a dense array or as a CSR matrix that
    includes the identity entries.
    """

    def __init__(self, full, landmarks, p=None):
        self.full = full
        self.landmarks = np.asarray(landmarks, dtype=np.int64)
        self.n, self.l = full.shape
        mask = np.ones(self.n, dtype=bool)
        mask[self.landmarks] = False
        self.u = np.flatnonzero(mask)
        # per-column budget when thresholded, None for dense
        self.p = p

    @property
    def is_sparse(self):
        return sparse.issparse(self.full)

    @property
    def Pu(self):
        """Non-landmark block, ``(n - l) x l``."""
        return self.full[self.u]

    @property
    def nnz_u(self):
        """Stored entries of ``P_u`` (dense counts every entry)."""
        if self.is_sparse:
            return int(self.full.nnz) - self.l
        return (self.n - self.l) * self.l

    def column_counts(self):
        """Stored non-zeros per column of ``P_u``."""
        if self.is_sparse:
            Pu = sparse.csc_matrix(self.full[self.u])
            return np.diff(Pu.indptr)
        return np.full(self.l, self.n - self.l)

    def rows(self, idx):
        """Dense rows of ``P``, shape (len(idx), l)."""
        R = self.full[np.asarray(idx, dtype=np.int64)]
        return R.toarray() if sparse.issparse(R) else np.asarray(R)

    def toarray(self):
        return self.full.toarray() if self.is_sparse else np.array(self.full)

    def matvec(self, x):
        """``P @ x``."""
        return self.full @ x

    def rmatvec(self, y):
        """``P^T @ y``."""
        return self.full.T @ y

    def column_sums(self):
        """``1^T P``, shape (l,)."""
        return np.asarray(self.full.sum(axis=0)).ravel()


def _assemble(Pu, landmarks, u, n, p=None):
    l = len(landmarks)
    if sparse.issparse(Pu):
        Pu = sparse.coo_matrix(Pu)
        rows = np.concatenate([landmarks, u[Pu.row]])
        cols = np.concatenate([np.arange(l), Pu.col])
        vals = np.concatenate([np.ones(l), Pu.data])
        full = sparse.csr_matrix((vals, (rows, cols)), shape=(n, l))
        full.sort_indices()
        return InterpOperator(full, landmarks, p=p)
    full = np.zeros((n, l))
    full[landmarks, np.arange(l)] = 1.0
    full[u] = Pu
    return InterpOperator(full, landmarks, p=p)


def _landmark_indices(landmarks):
    return landmarks.indices if isinstance(landmarks, LandmarkSet) else np.asarray(landmarks)


def _iter_column_solutions(M, landmarks, cfg, chunk):
    """Yield ``(cols, block)`` with ``block = -M_uu^{-1} M_ub[:, cols]``."""
    b = _landmark_indices(landmarks)
    _, _, M_ub, M_uu = M.blocks(b)
    l = len(b)
    if M_uu.shape[0] == 0:
        return
    factor = factorize_spd(M_uu, cfg) if cfg.method == "cholesky" else None
    for start in range(0, l, chunk):
        cols = np.arange(start, min(start + chunk, l))
        rhs = -M_ub[:, cols].toarray()
        yield cols, solve_spd(M_uu, rhs, cfg, factor=factor)


def interpolation_operator(M, landmarks, cfg=None, chunk=256):
    """Dense interpolation operator ``P = [I_l; -M_uu^{-1} M_ub]``.

    Parameters
    ----------
    M : BiharmonicOp
    landmarks : LandmarkSet or array of int
    cfg : SolveConfig, optional
    chunk : int
        Right-hand sides solved per batch.

    Raises
    ------
    SingularOperator
        ``M_uu`` could not be factored.
    """
    cfg = cfg or SolveConfig()
    b = _landmark_indices(landmarks)
    _, u = M.partition(b)
    Pu = np.zeros((len(u), len(b)))
    for cols, block in _iter_column_solutions(M, b, cfg, chunk):
        Pu[:, cols] = block
    return _assemble(Pu, b, u, M.n)


def column_budget(n, l, p_row):
    """Per-column non-zero budget ``p = ceil((n - l) * p_row / l)``, clipped to ``[1, n - l]``."""
    if n - l <= 0:
        return 0
    p = math.ceil((n - l) * p_row / l)
    return int(min(max(p, 1), n - l))


def _threshold_columns(block, p):
    """Keep the ``p`` largest-magnitude entries per column (ties -> lowest row)."""
    m, k = block.shape
    if p >= m:
        keep = np.broadcast_to(np.arange(m)[:, None], (m, k))
    else:
        order = np.argsort(-np.abs(block), axis=0, kind="stable")
        keep = np.sort(order[:p], axis=0)
    cols = np.broadcast_to(np.arange(k), keep.shape)
    vals = block[keep, cols]
    return keep.ravel(order="F"), cols.ravel(order="F"), vals.ravel(order="F")


def sparsify_operator(P, p_row):
    """Threshold a dense operator to at most ``p`` non-zeros per column of ``P_u``.

    ``p = ceil((n - l) * p_row / l)``. Kept values are copied unchanged and
    the identity block is untouched. When ``p`` covers whole columns nothing
    is dropped and the operator keeps dense storage, so downstream products
    are bit-identical to the dense ones.
    """
    if P.is_sparse:
        raise ValueError("operator is already sparse")
    p = column_budget(P.n, P.l, p_row)
    if p >= P.n - P.l:
        return InterpOperator(np.array(P.full), P.landmarks, p=p)
    r, c, v = _threshold_columns(np.asarray(P.Pu), p)
    Pu = sparse.csc_matrix((v, (r, c)), shape=(P.n - P.l, P.l))
    return _assemble(Pu, P.landmarks, P.u, P.n, p=p)


def sparse_interpolation_operator(M, landmarks, p_row, cfg=None, chunk=64, timings=None):
    """Solve and threshold ``P_u`` a few columns at a time.

    Gives the same result as ``sparsify_operator(interpolation_operator(...))``
    while holding only ``(n - l) * chunk`` dense values at once. If a dict is
    passed as ``timings``, seconds spent in ``"solve"`` and ``"threshold"``
    are added to it.
    """
    timings = {} if timings is None else timings
    timings.setdefault("solve", 0.0)
    timings.setdefault("threshold", 0.0)
    cfg = cfg or SolveConfig()
    b = _landmark_indices(landmarks)
    _, u = M.partition(b)
    p = column_budget(M.n, len(b), p_row)
    if p >= len(u):
        tic = time.perf_counter()
        P = interpolation_operator(M, b, cfg, chunk=chunk)
        timings["solve"] += time.perf_counter() - tic
        P.p = p
        return P
    rows, cols, vals = [], [], []
    tic = time.perf_counter()
    for cidx, block in _iter_column_solutions(M, b, cfg, chunk):
        mid = time.perf_counter()
        timings["solve"] += mid - tic
        r, c, v = _threshold_columns(block, p)
        tic = time.perf_counter()
        timings["threshold"] += tic - mid
        rows.append(r)
        cols.append(cidx[c])
        vals.append(v)
    if rows:
        Pu = sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                               shape=(len(u), len(b)))
    else:
        Pu = sparse.csc_matrix((len(u), len(b)))
    return _assemble(Pu, b, u, M.n, p=p)


class BhaApprox:
    """Factored approximation ``K_hat = P W P^T``.

    With ``squared`` the landmark block holds squared distances, so the
    product approximates the squared-distance matrix used by MDS.
    """

    kind = "bha"

    def __init__(self, P, W, squared=False):
        W = np.asarray(W, dtype=np.float64)
        if W.shape != (P.l, P.l):
            raise ValueError(f"W must be {P.l}x{P.l}, got {W.shape}")
        self.P = P
        self.W = W
        self.squared = bool(squared)

    @property
    def n(self):
        return self.P.n

    @property
    def landmarks(self):
        return self.P.landmarks

    def evaluate_rows(self, rows):
        """Rows of ``P W P^T``, shape (len(rows), n)."""
        PW = self.P.rows(rows) @ self.W
        return np.asarray(self.P.full @ PW.T).T

    def entry(self, i, j):
        return float(self.P.rows([i])[0] @ self.W @ self.P.rows([j])[0])

    def toarray(self):
        P = self.P.toarray()
        return P @ self.W @ P.T

    def as_squared(self):
        """Copy with the landmark block squared elementwise."""
        if self.squared:
            return self
        return BhaApprox(self.P, self.W ** 2, squared=True)


def bha(P, landmarks, squared=False):
    """Biharmonic approximation from an interpolation operator and landmark rows."""
    if not np.array_equal(P.landmarks, landmarks.indices):
        raise ValueError("operator and landmark set use different landmarks")
    W = landmarks.landmark_block()
    if squared:
        W = W ** 2
    return BhaApprox(P, W, squared=squared)


class NystromApprox:
    """``K_hat = C W^+ C^T`` with ``C`` the landmark columns."""

    kind = "nystrom"

    def __init__(self, C, W_pinv, landmarks, rcond, condition):
        self.C = C
        self.W_pinv = W_pinv
        self.landmarks = landmarks
        self.rcond = rcond
        # sigma_min / sigma_max of W
        self.condition = condition

    @property
    def n(self):
        return self.C.shape[0]

    def evaluate_rows(self, rows):
        return (self.C[np.asarray(rows, dtype=np.int64)] @ self.W_pinv) @ self.C.T

    def entry(self, i, j):
        return float(self.C[i] @ self.W_pinv @ self.C[j])

    def toarray(self):
        return self.C @ self.W_pinv @ self.C.T


def nystrom(landmarks, rcond=1e-12):
    """Nystrom approximation from the landmark distance rows.

    The pseudoinverse discards singular values below ``rcond * sigma_max``.
    """
    C = np.ascontiguousarray(landmarks.rows.T)
    W = landmarks.landmark_block()
    U, s, Vt = np.linalg.svd(W)
    smax = s[0] if s.size else 0.0
    keep = s > rcond * smax
    W_pinv = (Vt[keep].T / s[keep]) @ U[:, keep].T
    condition = float(s[-1] / smax) if smax > 0 else 0.0
    return NystromApprox(C, W_pinv, landmarks.indices.copy(), rcond, condition)


def fmds_operator(P, M, mu=50.0):
    """FMDS interpolation matrix ``H = P (M_bb + mu I + M_bu P_u)^{-1} mu``.

    Raises
    ------
    SingularOperator
        The ``l x l`` system is singular.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    if P.is_sparse:
        raise ValueError("fmds_operator needs the dense operator")
    M_bb, M_bu, _, _ = M.blocks(P.landmarks)
    G = M_bb.toarray() + mu * np.eye(P.l)
    if P.n > P.l:
        G += np.asarray(M_bu @ P.Pu)
    try:
        lu = scipy.linalg.lu_factor(G, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SingularOperator(str(exc)) from exc
    if np.any(np.diag(lu[0]) == 0):
        raise SingularOperator("FMDS system matrix is singular")
    # H = P G^{-1} mu  <=>  H^T = mu G^{-T} P^T
    return (mu * scipy.linalg.lu_solve(lu, np.asarray(P.full).T, trans=1)).T
