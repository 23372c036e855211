"""One factorization contract over dense and sparse SPD matrices.

Dense matrices factor through LAPACK (dpotrf/dpotri); sparse symmetric
positive-definite matrices factor through SuperLU restricted to symmetric
mode with no diagonal pivoting and a minimum-degree ordering, which for
SPD input is an L D L^T factorization with a recorded fill-reducing
permutation. Both paths expose log-determinant, solves and quadratic
forms; a non-positive pivot raises NotPositiveDefiniteError with the
pivot index.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack, solve_triangular

from .errors import NotPositiveDefiniteError


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_vector(b, n, what="right-hand side"):
    b = np.asarray(b, dtype=float)
    if b.shape[0] != n:
        raise ValueError(f"{what} has length {b.shape[0]}, expected {n}")
    return b


class DenseCholesky:
    """Lower-triangular Cholesky factor of a dense SPD matrix."""

    is_sparse = False

    def __init__(self, lower, log_det):
        self.L = lower
        self.log_det = log_det
        self.n = lower.shape[0]

    def solve(self, b):
        """Solve A x = b for a vector or matrix right-hand side."""
        b = _check_vector(b, self.n)
        y = solve_triangular(self.L, b, lower=True)
        return solve_triangular(self.L, y, trans="T", lower=True)

    def quad_form(self, z):
        """z' A^{-1} z >= 0."""
        z = _check_vector(z, self.n)
        y = solve_triangular(self.L, z, lower=True)
        return float(y @ y)

    def inverse(self):
        """Dense A^{-1} via the triangular inverse of the factor."""
        inv, info = lapack.dpotri(self.L, lower=1)
        if info != 0:
            raise NotPositiveDefiniteError(f"dpotri failed with info={info}")
        inv = np.tril(inv)
        return inv + np.tril(inv, -1).T


class SparseCholesky:
    """Fill-reduced factorization of a sparse SPD matrix via SuperLU.

    With symmetric mode and no diagonal pivoting the factorization is
    P A P' = L U with U = D L', i.e. a Cholesky factor L sqrt(D) under the
    recorded permutation.
    """

    is_sparse = True

    def __init__(self, lu, log_det, n):
        self._lu = lu
        self.log_det = log_det
        self.n = n

    @property
    def permutation(self):
        """Fill-reducing permutation p with L L' reconstructing A[p, :][:, p]."""
        return np.argsort(self._lu.perm_c)

    def factor_lower(self):
        """Sparse lower-triangular factor L sqrt(D) of the permuted matrix."""
        d = self._lu.U.diagonal()
        return self._lu.L @ sp.diags(np.sqrt(d))

    def solve(self, b):
        b = _check_vector(b, self.n)
        return self._lu.solve(b)

    def quad_form(self, z):
        z = _check_vector(z, self.n)
        return float(z @ self._lu.solve(z))

    def inverse_entries(self, rows, cols, block=256):
        """Selected entries of A^{-1} at (rows[k], cols[k]).

        Solves against identity columns in blocks, keeping only the
        requested entries, so at most an n x block panel of the inverse is
        ever held.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        out = np.empty(rows.shape[0])
        needed = np.unique(cols)
        for s in range(0, needed.size, block):
            cs = needed[s:s + block]
            rhs = np.zeros((self.n, cs.size))
            rhs[cs, np.arange(cs.size)] = 1.0
            panel = self._lu.solve(rhs)
            pos = np.searchsorted(cs, cols)
            mask = (pos < cs.size)
            mask[mask] &= cs[pos[mask]] == cols[mask]
            out[mask] = panel[rows[mask], pos[mask]]
        return out

    def inverse(self, block=256):
        """Dense A^{-1} assembled from blocked identity solves."""
        inv = np.empty((self.n, self.n))
        for s in range(0, self.n, block):
            w = min(block, self.n - s)
            rhs = np.zeros((self.n, w))
            rhs[np.arange(s, s + w), np.arange(w)] = 1.0
            inv[:, s:s + w] = self._lu.solve(rhs)
        return inv


def cholesky(a, jitter=0.0):
    """Factor a symmetric positive-definite matrix, dense or sparse.

    Parameters
    ----------
    a : ndarray or scipy.sparse matrix
    jitter : float
        Optional explicit diagonal inflation added before factoring;
        nothing is ever added silently.

    Returns
    -------
    DenseCholesky or SparseCholesky

    Raises
    ------
    NotPositiveDefiniteError
        If a non-positive pivot is met; carries the pivot index.
    """
    if sp.issparse(a):
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        m = a.tocsc()
        if jitter:
            m = m + jitter * sp.identity(m.shape[0], format="csc")
        lu = spla.splu(m, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
        d = lu.U.diagonal()
        bad = np.nonzero(d <= 0)[0]
        if bad.size:
            raise NotPositiveDefiniteError(
                f"non-positive pivot {d[bad[0]]:.3e} at index {bad[0]}", pivot=int(bad[0]))
        return SparseCholesky(lu, float(np.sum(np.log(d))), m.shape[0])

    m = _as_2d(a)
    if jitter:
        m = m + jitter * np.eye(m.shape[0])
    lower, info = lapack.dpotrf(m, lower=1)
    if info > 0:
        raise NotPositiveDefiniteError(
            f"leading minor of order {info} is not positive definite", pivot=int(info) - 1)
    if info < 0:
        raise ValueError(f"illegal argument {-info} to dpotrf")
    diag = np.diagonal(lower)
    return DenseCholesky(lower, float(2.0 * np.sum(np.log(diag))))


def solve(factor, b):
    """Solve A x = b against a factor from cholesky()."""
    return factor.solve(b)


def quad_form(factor, z):
    """Quadratic form z' A^{-1} z against a factor from cholesky()."""
    return factor.quad_form(z)


def trace_product(a, b):
    """tr(A B) without forming the product when either operand is sparse."""
    if a.shape != b.shape or a.shape[0] != a.shape[1]:
        raise ValueError(f"conformable square matrices required, got {a.shape} and {b.shape}")
    if sp.issparse(a):
        return float(a.multiply(b.T).sum())
    if sp.issparse(b):
        return float(b.multiply(a.T).sum())
    return float(np.sum(a * b.T))


def schur(a, b):
    """Elementwise (Schur) product; sparsity pattern is the intersection."""
    if a.shape != b.shape:
        raise ValueError(f"equal shapes required, got {a.shape} and {b.shape}")
    if sp.issparse(a):
        return a.multiply(b)
    if sp.issparse(b):
        return b.multiply(a)
    return a * b
