"""Dense and sparse linear-algebra kernels shared by the geometry and solver modules.

Everything here is a pure function of its inputs. Factorizations delegate to
LAPACK through numpy; the wrappers pin down the conventions (ordering, signs,
tolerances) the rest of the package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInput, RankDeficient

# Relative threshold below which a singular or eigen value counts as zero.
EPS_RANK = 1e-12

# Relative slack accepted when checking that a matrix is symmetric.
SYM_TOL = 1e-10

_TINY = np.finfo(np.float64).tiny


def _as_matrix(a, name):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInput(f"{name} must be a 2-d array, got ndim={a.ndim}")
    return a


def _require_finite(a, name):
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} contains non-finite entries")


def canonical_signs(u, v=None):
    """Flip factor columns so each column of ``u`` leads with a positive entry.

    The leading entry is the first one that is not negligible relative to the
    column's largest magnitude. When ``v`` is given its columns are flipped in
    lockstep so any product u @ diag(s) @ v.T is unchanged. Returns new arrays.
    """
    u = np.array(u, dtype=np.float64)
    v = None if v is None else np.array(v, dtype=np.float64)
    for j in range(u.shape[1]):
        col = u[:, j]
        scale = np.max(np.abs(col)) if col.size else 0.0
        if scale == 0.0:
            continue
        lead = col[np.flatnonzero(np.abs(col) > 1e-12 * scale)[0]]
        if lead < 0.0:
            u[:, j] = -col
            if v is not None:
                v[:, j] = -v[:, j]
    return u if v is None else (u, v)


@dataclass(frozen=True)
class ThinSVD:
    """Rank-k factorization U @ diag(s) @ V.T with orthonormal U, V columns."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return int(self.s.shape[0])

    def to_matrix(self):
        return (self.U * self.s) @ self.V.T


def thin_svd(a, k):
    """Best rank-k factorization of a dense matrix.

    Singular values come back nonincreasing and the factor signs are
    canonicalized, so equal inputs give bitwise-equal outputs.
    """
    a = _as_matrix(a, "a")
    _require_finite(a, "a")
    m, n = a.shape
    if not 1 <= k <= min(m, n):
        raise InvalidInput(f"k={k} outside [1, min(m, n)={min(m, n)}]")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    u, v = canonical_signs(u[:, :k], vt[:k].T)
    return ThinSVD(u, np.ascontiguousarray(s[:k]), v)


def truncated_sym_eig(m, k):
    """Top-k algebraically largest eigenpairs of a symmetric matrix.

    Returns (w, Q) with w nonincreasing and Q's columns the matching
    eigenvectors, sign-canonicalized. The input must be symmetric to within
    ``SYM_TOL`` relative Frobenius error.
    """
    m = _as_matrix(m, "m")
    _require_finite(m, "m")
    if m.shape[0] != m.shape[1]:
        raise InvalidInput(f"m must be square, got {m.shape}")
    nrm = np.linalg.norm(m)
    if np.linalg.norm(m - m.T) > SYM_TOL * max(nrm, _TINY):
        raise InvalidInput("m is not symmetric within tolerance")
    if not 1 <= k <= m.shape[0]:
        raise InvalidInput(f"k={k} outside [1, {m.shape[0]}]")
    w, q = np.linalg.eigh(0.5 * (m + m.T))
    w = np.ascontiguousarray(w[::-1][:k])
    q = canonical_signs(q[:, ::-1][:, :k])
    return w, q


def solve_sylvester_sym(s, c):
    """Solve E @ S + S @ E = C for E, with S symmetric positive definite.

    Diagonalizing S reduces the equation to an elementwise division by the
    eigenvalue-sum grid, which keeps the cost at one symmetric
    eigendecomposition plus a few dense products.
    """
    s = _as_matrix(s, "s")
    c = _as_matrix(c, "c")
    if s.shape[0] != s.shape[1] or s.shape != c.shape:
        raise InvalidInput(f"shape mismatch: s {s.shape}, c {c.shape}")
    _require_finite(s, "s")
    _require_finite(c, "c")
    nrm = np.linalg.norm(s)
    if np.linalg.norm(s - s.T) > SYM_TOL * max(nrm, _TINY):
        raise InvalidInput("s is not symmetric within tolerance")
    w, q = np.linalg.eigh(0.5 * (s + s.T))
    if w[-1] <= 0.0 or w[0] <= EPS_RANK * w[-1]:
        raise RankDeficient("s is singular within tolerance")
    ct = q.T @ c @ q
    return q @ (ct / np.add.outer(w, w)) @ q.T


def masked_gram_residual(z, mask):
    """Entries of (Z @ Z.T - target) on the mask pattern, as a CSR matrix.

    Only stored pairs are touched: the cost is one length-r dot product per
    pattern entry, never a dense n x n Gram matrix. ``mask`` is any object
    with ``n``, ``rows``, ``cols``, ``target`` and ``indptr`` attributes laid
    out in row-major order (see NeighborMask).
    """
    z = _as_matrix(z, "z")
    if z.shape[0] != mask.n:
        raise InvalidInput(f"z has {z.shape[0]} rows, mask expects {mask.n}")
    vals = np.einsum("ij,ij->i", z[mask.rows], z[mask.cols]) - mask.target
    out = sp.csr_matrix((vals, mask.cols, mask.indptr), shape=(mask.n, mask.n))
    return out


def soft_threshold(x, t):
    """Shrink toward zero: sign(x) * max(|x| - t, 0). ``t`` must be >= 0."""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise InvalidInput("threshold must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)
