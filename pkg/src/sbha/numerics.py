"""Numeric kernels shared by the rest of the package.

Sparse symmetric storage is plain ``scipy.sparse.csr_matrix``; rectangular
operators built column by column use ``csc_matrix``. The helpers here add
the checks and failure modes the higher-level code relies on.
"""

from dataclasses import dataclass
import logging
import warnings

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

logger = logging.getLogger(__name__)


class SingularOperator(RuntimeError):
    """A factorization failed even after the regularization retry."""


class NonConvergence(RuntimeError):
    """An iterative method ran out of iterations."""


class NonSymmetric(ValueError):
    """A matrix expected to be symmetric is not."""


@dataclass(frozen=True)
class SolveConfig:
    """Options for :func:`solve_spd`.

    Parameters
    ----------
    method : {"cholesky", "cg"}
        ``"cholesky"`` factors once with a fill-reducing ordering and reuses
        the factor for every right-hand side. ``"cg"`` runs conjugate
        gradients per column and needs no factor storage.
    rel_residual_tol : float
        Accepted ``||AX - B||_F / ||B||_F``.
    max_iters : int or None
        CG iteration cap. ``None`` means ``10 * n``.
    regularization : float or None
        Diagonal shift for the retry after a failed factorization. ``None``
        means ``1e-9 * trace(A) / n``.
    """

    method: str = "cholesky"
    rel_residual_tol: float = 1e-8
    max_iters: int | None = None
    regularization: float | None = None

    def __post_init__(self):
        if self.method not in ("cholesky", "cg"):
            raise ValueError(f"unknown solve method {self.method!r}")
        if not self.rel_residual_tol > 0:
            raise ValueError("rel_residual_tol must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def as_sparse_sym(A, check=True):
    """Return ``A`` as a canonical CSR matrix (sorted indices, no zeros).

    With ``check`` the matrix must be exactly symmetric, both in pattern and
    values.
    """
    A = sparse.csr_matrix(A, dtype=np.float64, copy=True)
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    if A.shape[0] != A.shape[1]:
        raise NonSymmetric(f"matrix is not square: {A.shape}")
    if check and not is_structurally_symmetric(A, values=True):
        raise NonSymmetric("sparse matrix is not symmetric")
    return A


def is_structurally_symmetric(A, values=False):
    """Check that the pattern of ``A`` equals the pattern of its transpose."""
    A = sparse.csr_matrix(A)
    At = sparse.csr_matrix(A.T)
    A.sort_indices()
    At.sort_indices()
    if not (np.array_equal(A.indptr, At.indptr) and np.array_equal(A.indices, At.indices)):
        return False
    return not values or np.array_equal(A.data, At.data)


def _relative_residual(A, X, B):
    bnorm = np.linalg.norm(B)
    if bnorm == 0.0:
        return float(np.linalg.norm(A @ X))
    return float(np.linalg.norm(A @ X - B) / bnorm)


def _factorize(A):
    # Symmetric-mode SuperLU with a minimum-degree ordering on A + A^T and no
    # pivoting behaves like an LDL^T factorization of an SPD matrix.
    return spla.splu(
        sparse.csc_matrix(A),
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options={"SymmetricMode": True},
    )


def factorize_spd(A, cfg=None):
    """Factor a sparse SPD matrix, retrying once with a diagonal shift.

    Returns ``(factor, shift)`` where ``factor.solve(b)`` solves
    ``(A + shift*I) x = b``.
    """
    cfg = cfg or SolveConfig()
    A = sparse.csc_matrix(A, dtype=np.float64)
    n = A.shape[0]
    try:
        lu = _factorize(A)
        if np.all(np.isfinite(lu.U.diagonal())) and np.all(lu.U.diagonal() > 0):
            return lu, 0.0
        reason = "non-positive pivot"
    except RuntimeError as exc:
        reason = str(exc)
    shift = cfg.regularization
    if shift is None:
        shift = 1e-9 * A.diagonal().sum() / max(n, 1)
    warnings.warn(f"factorization failed ({reason}); retrying with diagonal shift {shift:.3g}",
                  RuntimeWarning, stacklevel=2)
    if shift <= 0:
        raise SingularOperator(f"factorization failed ({reason}) and no positive shift is available")
    try:
        lu = _factorize(A + shift * sparse.identity(n, format="csc"))
    except RuntimeError as exc:
        raise SingularOperator(f"factorization failed after regularization: {exc}") from exc
    if not (np.all(np.isfinite(lu.U.diagonal())) and np.all(lu.U.diagonal() > 0)):
        raise SingularOperator("factorization failed after regularization: non-positive pivot")
    return lu, shift


def _solve_factored(A, lu, B, tol, refine=3):
    X = lu.solve(B)
    for _ in range(refine):
        res = _relative_residual(A, X, B)
        if res <= tol:
            break
        X = X + lu.solve(B - A @ X)
    return X


def _solve_cg(A, B, cfg):
    n = A.shape[0]
    maxiter = cfg.max_iters or 10 * n
    # Jacobi preconditioner; M_uu has a strong positive diagonal.
    diag = A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda x: x / diag, dtype=np.float64)
    X = np.zeros_like(B)
    for j in range(B.shape[1]):
        b = B[:, j]
        if not np.any(b):
            continue
        x, info = spla.cg(A, b, rtol=cfg.rel_residual_tol * 0.1, maxiter=maxiter, M=precond)
        if info > 0:
            raise NonConvergence(f"CG did not converge in {maxiter} iterations (column {j})")
        X[:, j] = x
    return X


def solve_spd(A, B, cfg=None, factor=None):
    """Solve ``A X = B`` for sparse SPD ``A``.

    Parameters
    ----------
    A : sparse matrix, shape (n, n)
    B : ndarray or sparse matrix, shape (n,) or (n, k)
    cfg : SolveConfig, optional
    factor : tuple, optional
        A ``(factor, shift)`` pair from :func:`factorize_spd` to reuse.

    Returns
    -------
    X : ndarray with the shape of ``B``

    Raises
    ------
    SingularOperator
        The factorization failed even after one regularized retry, or the
        residual stays above tolerance.
    NonConvergence
        CG exceeded ``max_iters``.
    """
    cfg = cfg or SolveConfig()
    A = sparse.csr_matrix(A, dtype=np.float64)
    if sparse.issparse(B):
        B = B.toarray()
    B = np.asarray(B, dtype=np.float64)
    vector = B.ndim == 1
    if vector:
        B = B[:, None]
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"right-hand side has {B.shape[0]} rows, operator has {A.shape[0]}")
    if B.shape[1] == 0 or A.shape[0] == 0:
        X = np.zeros_like(B)
        return X[:, 0] if vector else X

    if cfg.method == "cg":
        X = _solve_cg(A, B, cfg)
        target = A
    else:
        lu, shift = factor if factor is not None else factorize_spd(A, cfg)
        target = A if shift == 0.0 else A + shift * sparse.identity(A.shape[0], format="csr")
        X = _solve_factored(target, lu, B, cfg.rel_residual_tol)

    res = _relative_residual(target, X, B)
    if not res <= cfg.rel_residual_tol:
        raise SingularOperator(
            f"relative residual {res:.3g} exceeds tolerance {cfg.rel_residual_tol:.3g}")
    return X[:, 0] if vector else X


def dense_eig_sym(S):
    """Eigendecomposition of a small dense symmetric matrix.

    Eigenvalues come back in descending order with matching eigenvector
    columns.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise NonSymmetric(f"matrix is not square: {S.shape}")
    asym = np.max(np.abs(S - S.T)) if S.size else 0.0
    if asym > 1e-8 * np.linalg.norm(S):
        raise NonSymmetric(f"max |S - S^T| = {asym:.3g}")
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return w[::-1].copy(), V[:, ::-1].copy()


def thin_qr(A):
    """Reduced QR factorization ``A = Q R`` with ``Q`` of shape (n, l)."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape[0] < A.shape[1]:
        raise ValueError(f"thin_qr needs rows >= cols, got {A.shape}")
    Q, R = np.linalg.qr(A, mode="reduced")
    return Q, R


def _orthogonalize(w, V):
    # Two passes of classical Gram-Schmidt ("twice is enough").
    for _ in range(2):
        w = w - V @ (V.T @ w)
    return w


def lanczos_topk(apply, n, k, tol=1e-10, max_iters=50, seed=0, ncv=None):
    """Top-``k`` algebraic eigenpairs of a symmetric operator.

    Thick-restart Lanczos with full reorthogonalization. Only ``apply`` is
    needed, so the operator never has to be stored.

    Parameters
    ----------
    apply : callable
        ``apply(x)`` returns ``A @ x`` for a length-``n`` vector.
    n : int
        Operator dimension.
    k : int
        Number of eigenpairs, ``k < n``.
    tol : float
        Convergence when ``||A v - lambda v|| <= tol * |lambda_max|`` for
        every wanted pair.
    max_iters : int
        Maximum number of restarts.
    seed : int
        Seed for the start vector.
    ncv : int, optional
        Krylov subspace size per cycle. Defaults to ``min(n, max(2k + 1, 20))``.

    Returns
    -------
    eigenvalues : ndarray, shape (k,)
        Descending.
    eigenvectors : ndarray, shape (n, k)
        Orthonormal columns.
    """
    if not 0 < k < n:
        raise ValueError(f"need 0 < k < n, got k={k}, n={n}")
    ncv = min(n, max(2 * k + 1, 20) if ncv is None else ncv)
    if ncv <= k:
        raise ValueError("ncv must exceed k")
    rng = np.random.default_rng(seed)

    V = np.zeros((n, ncv + 1))
    T = np.zeros((ncv, ncv))
    v = rng.standard_normal(n)
    V[:, 0] = v / np.linalg.norm(v)
    start = 0  # number of locked Ritz vectors carried into this cycle

    for restart in range(max_iters):
        beta = 0.0
        for j in range(start, ncv):
            w = np.asarray(apply(V[:, j]), dtype=np.float64)
            alpha = V[:, j] @ w
            T[j, j] = alpha
            w = _orthogonalize(w, V[:, : j + 1])
            beta = np.linalg.norm(w)
            scale = max(abs(alpha), np.abs(T[: j + 1, : j + 1]).max(), 1.0)
            if beta <= 1e-12 * scale:
                # Invariant subspace found; continue from a fresh direction.
                beta = 0.0
                w = _orthogonalize(rng.standard_normal(n), V[:, : j + 1])
                V[:, j + 1] = w / np.linalg.norm(w)
            else:
                V[:, j + 1] = w / beta
            if j + 1 < ncv:
                T[j, j + 1] = T[j + 1, j] = beta

        theta, Y = np.linalg.eigh(T)
        theta, Y = theta[::-1], Y[:, ::-1]
        resid = np.abs(beta * Y[-1, :])
        lam_max = max(np.abs(theta).max(), np.finfo(float).tiny)
        if np.all(resid[:k] <= tol * lam_max):
            vecs = V[:, :ncv] @ Y[:, :k]
            # One more orthonormalization pass guards against roundoff drift.
            vecs, _ = np.linalg.qr(vecs)
            vecs *= np.sign(np.sum(vecs * (V[:, :ncv] @ Y[:, :k]), axis=0))
            return theta[:k].copy(), vecs

        # Thick restart: keep a few more Ritz pairs than requested.
        keep = min(ncv - 1, k + (ncv - k) // 2)
        Vk = V[:, :ncv] @ Y[:, :keep]
        V[:, :keep] = Vk
        V[:, keep] = V[:, ncv]
        V[:, keep + 1:] = 0.0
        T[:] = 0.0
        T[np.arange(keep), np.arange(keep)] = theta[:keep]
        T[keep, :keep] = T[:keep, keep] = beta * Y[-1, :keep]
        start = keep
        logger.debug("lanczos restart %d, max residual %.3g", restart, resid[:k].max())

    raise NonConvergence(f"Lanczos did not converge after {max_iters} restarts")
