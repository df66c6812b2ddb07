"""Rank-constrained linear model: min ||X W - Y||_F^2 over rank-r matrices W.

Desk-scale module. The closed form needs a full factorization of the feature
matrix, so it is gated to small problems; its role is to provide exact
optima that the manifold optimizer must independently reach. Objective and
gradient evaluation keep W factored throughout (the d x l matrix is never
formed).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .ambient import ProductAmbient
from .errors import InvalidInput, RankDeficient
from .fixed_rank import FixedRankManifold, FixedRankPoint
from .linalg import EPS_RANK, canonical_signs, thin_svd
from .rcg import Problem

# The closed form densifies X; refuse anything bigger than this many entries.
CLOSED_FORM_MAX_ENTRIES = 1_000_000


class GlobalProblem:
    """Least-squares fit of rank-r W to sparse features X and labels Y."""

    def __init__(self, X, Y, r):
        X = sp.csr_matrix(X)
        Y = sp.csr_matrix(Y)
        if X.shape[0] != Y.shape[0]:
            raise InvalidInput(f"X has {X.shape[0]} rows, Y has {Y.shape[0]}")
        d, l = X.shape[1], Y.shape[1]
        if not 1 <= r <= min(d, l):
            raise InvalidInput(f"rank r={r} outside [1, min(d={d}, l={l})]")
        self.X = X
        self.Y = Y
        self.r = int(r)
        self.manifold = FixedRankManifold(d, l, r)
        self._y_dense = None

    @property
    def shape(self):
        return (self.X.shape[0], self.X.shape[1], self.Y.shape[1])

    @property
    def y_dense(self):
        if self._y_dense is None:
            self._y_dense = self.Y.toarray()
        return self._y_dense

    def _residual(self, w):
        xu = self.X @ w.U
        return (xu * w.s) @ w.V.T - self.y_dense

    def objective(self, w):
        """||X W - Y||_F^2 evaluated through the factors of W."""
        resid = self._residual(w)
        return float(np.vdot(resid, resid))

    def euclidean_gradient(self, w):
        """2 X.T (X W - Y), returned factored so projection stays cheap."""
        resid = 2.0 * self._residual(w)
        return ProductAmbient(self.X.T, resid.T)

    def rcg_problem(self):
        return Problem(self.manifold, self.objective, self.euclidean_gradient)


def global_closed_form(problem):
    """Exact minimizer of the rank-constrained least squares problem.

    For X with full column rank and X = Ux Sx Vx.T, the optimum is
    W* = Vx Sx^-1 B_r where B_r is the best rank-r approximation of Ux.T Y.
    Returns W* as a factored point. Gated to small problems because it
    densifies X.
    """
    n, d = problem.X.shape
    if n * d > CLOSED_FORM_MAX_ENTRIES:
        raise InvalidInput(
            f"closed form is desk-scale only (n*d={n * d} > {CLOSED_FORM_MAX_ENTRIES})"
        )
    if n < d:
        raise RankDeficient(f"X ({n} x {d}) cannot have full column rank")
    ux, sx, vxt = np.linalg.svd(problem.X.toarray(), full_matrices=False)
    if sx[0] <= 0.0 or sx[-1] <= EPS_RANK * sx[0]:
        raise RankDeficient("X is rank deficient within tolerance")
    b = thin_svd(ux.T @ problem.y_dense, problem.r)
    if b.s[-1] <= EPS_RANK * max(b.s[0], np.finfo(np.float64).tiny):
        raise RankDeficient("optimal W has rank below r within tolerance")
    # Re-orthonormalize the skewed left factor Vx Sx^-1 Ub.
    left = vxt.T @ (b.U / sx[:, None])
    q, rr = np.linalg.qr(left)
    uc, sc, vct = np.linalg.svd(rr * b.s)
    u = q @ uc
    v = b.V @ vct.T
    u, v = canonical_signs(u, v)
    return FixedRankPoint(u, sc, v)
