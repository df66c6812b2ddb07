"""Per-cluster embedding learning and the sparse linear regressor.

Given binary label rows Y for one cluster, the goal is a low-dimensional
embedding row z_i per point whose inner products reproduce the label-Gram
values y_i.T y_j on a sparse neighborhood pattern. Two solvers are provided:
a conjugate-gradient run over the rank-r PSD factor geometry, and a
projected-gradient baseline (SVP) that re-truncates a full eigendecomposition
each step. A regressor V mapping feature rows to embedding rows is then fit
by ADMM with an elastic penalty: ridge on V plus an L1 term on the predicted
embeddings X V.T.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

from .errors import DivergenceError, InvalidInput
from .linalg import masked_gram_residual, soft_threshold, truncated_sym_eig
from .psd_fixed_rank import PsdFixedRankManifold, PsdPoint
from .rcg import (
    IterationRecord,
    Problem,
    RcgConfig,
    RcgTrace,
    TerminationReason,
    rcg_minimize,
)

_TINY = np.finfo(np.float64).tiny


class NeighborMask:
    """Retained row-pair pattern with cached Gram targets.

    A stored pair (i, j) means row j is one of row i's preserved neighbors;
    ``target`` holds the corresponding Gram value. Pairs are kept sorted
    row-major with every diagonal pair present, so masked residuals can be
    wrapped into scipy CSR matrices without copying.
    """

    __slots__ = ("n", "rows", "cols", "target", "indptr")

    def __init__(self, n, rows, cols, target):
        n = int(n)
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        target = np.asarray(target, dtype=np.float64).ravel()
        if not (rows.shape == cols.shape == target.shape):
            raise InvalidInput("rows, cols and target must have equal length")
        if rows.size == 0:
            raise InvalidInput("mask must contain at least the diagonal pairs")
        if rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n:
            raise InvalidInput(f"pair indices out of range for n={n}")
        if not np.all(np.isfinite(target)):
            raise InvalidInput("target contains non-finite entries")
        order = np.lexsort((cols, rows))
        rows, cols, target = rows[order], cols[order], target[order]
        keys = rows * n + cols
        if np.any(np.diff(keys) == 0):
            raise InvalidInput("duplicate pairs in mask")
        diag = rows == cols
        if np.count_nonzero(diag) != n:
            raise InvalidInput("every row must retain its own diagonal pair")
        self.n = n
        self.rows = rows
        self.cols = cols
        self.target = target
        counts = np.bincount(rows, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @property
    def nnz(self):
        return int(self.rows.size)

    def diagonal_mean(self):
        return float(self.target[self.rows == self.cols].mean())

    def target_norm_sq(self):
        return float(self.target @ self.target)

    def values_csr(self, values):
        """Wrap per-pair values into a CSR matrix on this pattern."""
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.shape != self.rows.shape:
            raise InvalidInput("values length does not match the pattern")
        return sp.csr_matrix((values, self.cols, self.indptr), shape=(self.n, self.n))


def build_neighbor_mask(y, nbar):
    """Keep, per row, the nbar rows with largest label inner products.

    The row itself is always retained; the remaining nbar - 1 slots go to the
    largest y_i.T y_j with ties broken by lower index, padding with the
    lowest unused indices when fewer than nbar - 1 neighbors have positive
    inner products. Targets store the exact inner products.
    """
    y = sp.csr_matrix(y)
    n = y.shape[0]
    if not 1 <= nbar <= n:
        raise InvalidInput(f"nbar={nbar} outside [1, n={n}]")
    gram = (y @ y.T).tocsr()
    gram.sort_indices()
    self_dot = np.asarray(y.multiply(y).sum(axis=1)).ravel()

    rows_out = np.empty(n * nbar, dtype=np.int64)
    cols_out = np.empty(n * nbar, dtype=np.int64)
    target_out = np.empty(n * nbar, dtype=np.float64)
    pos = 0
    for i in range(n):
        lo, hi = gram.indptr[i], gram.indptr[i + 1]
        cand = gram.indices[lo:hi]
        vals = gram.data[lo:hi]
        keep = cand != i
        cand, vals = cand[keep], vals[keep]
        take = nbar - 1
        if cand.size > take:
            order = np.lexsort((cand, -vals))[:take]
            sel, sel_vals = cand[order], vals[order]
        else:
            sel, sel_vals = cand, vals
            short = take - cand.size
            if short > 0:
                used = np.concatenate([cand, [i]])
                pad = np.setdiff1d(np.arange(n), used, assume_unique=False)[:short]
                sel = np.concatenate([sel, pad])
                sel_vals = np.concatenate([sel_vals, np.zeros(short)])
        cols_i = np.concatenate([[i], sel])
        vals_i = np.concatenate([[self_dot[i]], sel_vals])
        order = np.argsort(cols_i)
        rows_out[pos : pos + nbar] = i
        cols_out[pos : pos + nbar] = cols_i[order]
        target_out[pos : pos + nbar] = vals_i[order]
        pos += nbar
    return NeighborMask(n, rows_out, cols_out, target_out)


def pattern_gram(mask, z):
    """Inner products z_i.T z_j for every stored pair, in pattern order."""
    z = np.asarray(z, dtype=np.float64)
    return np.einsum("ij,ij->i", z[mask.rows], z[mask.cols])


def masked_objective(mask, z):
    """Sum of squared residuals (target_ij - z_i.T z_j) over the pattern."""
    z = z.Z if isinstance(z, PsdPoint) else np.asarray(z, dtype=np.float64)
    if z.shape[0] != mask.n:
        raise InvalidInput(f"z has {z.shape[0]} rows, mask expects {mask.n}")
    resid = pattern_gram(mask, z) - mask.target
    return float(resid @ resid)


def masked_gradient(mask, z):
    """Factor-space gradient of the masked objective: 2 (R + R.T) Z.

    R holds the masked residual Z Z.T - target; the two sparse products keep
    the cost at O(nnz * r).
    """
    z = z.Z if isinstance(z, PsdPoint) else np.asarray(z, dtype=np.float64)
    r_sp = masked_gram_residual(z, mask)
    return 2.0 * (r_sp @ z + r_sp.T @ z)


@dataclass(frozen=True)
class EmbeddingResult:
    Z: np.ndarray
    final_objective: float
    trace: RcgTrace


def solve_embedding_rcg(mask, r, cfg=None, seed=0):
    """Fit a rank-r embedding to the masked Gram targets by manifold CG.

    The initial factor is Gaussian, scaled so the expected diagonal of
    Z Z.T matches the mean diagonal target.
    """
    n = mask.n
    if not 1 <= r <= n:
        raise InvalidInput(f"r={r} outside [1, n={n}]")
    diag_mean = mask.diagonal_mean()
    scale = np.sqrt(diag_mean / r) if diag_mean > 0 else 1.0
    rng = np.random.default_rng(seed)
    z0 = PsdPoint(scale * rng.standard_normal((n, r)))
    manifold = PsdFixedRankManifold(n, r)
    problem = Problem(
        manifold,
        lambda p: masked_objective(mask, p.Z),
        lambda p: masked_gradient(mask, p.Z),
    )
    point, trace = rcg_minimize(problem, z0, cfg)
    return EmbeddingResult(point.Z, masked_objective(mask, point.Z), trace)


def solve_embedding_svp(mask, r, eta=0.5, max_iters=200, z0=None, rel_tol=1e-8):
    """Projected-gradient (SVP) baseline for the masked Gram fit.

    Iterates M <- P_r(M + eta * sym(P_mask(target - M))) with the projection
    realized by a truncated symmetric eigendecomposition; the iterate stays
    factored as Z with M = Z Z.T. When fewer than r eigenvalues are positive
    the factor narrows to the positive count and the returned Z is padded
    with zero columns (noted in the trace). If the objective grows past ten
    times its starting value (floored at a rounding-noise scale, so a start
    at the exact solution is not mistaken for a blow-up) the step is halved
    and the run restarts, at most five times, after which DivergenceError is
    raised.
    """
    n = mask.n
    if not 1 <= r <= n:
        raise InvalidInput(f"r={r} outside [1, n={n}]")
    if eta <= 0:
        raise InvalidInput("eta must be positive")
    z_init = np.zeros((n, 0)) if z0 is None else np.asarray(z0, dtype=np.float64)
    noise_floor = 1e-18 * max(mask.target_norm_sq(), 1.0)

    for restart in range(6):
        trace = RcgTrace()
        z = z_init
        f_start = masked_objective(mask, z) if z.size else mask.target_norm_sq()
        f_prev = f_start
        rank_note = False
        diverged = False
        for _ in range(max_iters):
            resid = mask.target - pattern_gram(mask, z)
            r_sp = mask.values_csr(resid)
            a = z @ z.T if z.size else np.zeros((n, n))
            a += (0.5 * eta) * (r_sp + r_sp.T).toarray()
            a = 0.5 * (a + a.T)
            w, q = truncated_sym_eig(a, r)
            rhat = min(r, int(np.count_nonzero(w > 0.0)))
            if rhat < r and not rank_note:
                trace.notes.append(
                    f"projection kept rank {rhat} < {r}; factor padded with zero columns"
                )
                rank_note = True
            z = q[:, :rhat] * np.sqrt(w[:rhat]) if rhat > 0 else np.zeros((n, 0))
            f = masked_objective(mask, z)
            trace.iterations.append(
                IterationRecord(f, float(np.linalg.norm(resid)), eta, 0, float("nan"))
            )
            if f > 10.0 * max(f_start, noise_floor):
                diverged = True
                break
            if abs(f_prev - f) <= rel_tol * max(f_prev, _TINY):
                trace.reason = TerminationReason.GRAD_TOL
                break
            f_prev = f
        if diverged:
            eta *= 0.5
            continue
        if trace.reason is None:
            trace.reason = TerminationReason.MAX_ITERS
        if z.shape[1] < r:
            z = np.hstack([z, np.zeros((n, r - z.shape[1]))])
        return EmbeddingResult(z, masked_objective(mask, z), trace)
    raise DivergenceError("svp diverged after 5 step-halving restarts")


@dataclass(frozen=True)
class AdmmConfig:
    """Regressor penalties and stopping rules.

    ``lam`` is the ridge weight on V, ``mu`` the L1 weight on the predicted
    embeddings X V.T (0 switches the L1 term off), ``rho`` the augmented
    Lagrangian weight.
    """

    lam: float = 0.1
    mu: float = 0.01
    rho: float = 1.0
    max_iters: int = 100
    abs_tol: float = 1e-4
    rel_tol: float = 1e-3

    def __post_init__(self):
        if self.lam <= 0 or self.rho <= 0:
            raise InvalidInput("lam and rho must be positive")
        if self.mu < 0:
            raise InvalidInput("mu must be nonnegative")
        if self.max_iters < 1:
            raise InvalidInput("max_iters must be >= 1")
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise InvalidInput("tolerances must be positive")


def admm_objective(x, z, v, lam, mu):
    """||Z - X V.T||_F^2 + lam ||V||_F^2 + mu ||X V.T||_1."""
    pred = np.asarray(x @ v.T)
    resid = z - pred
    return float(np.vdot(resid, resid) + lam * np.vdot(v, v) + mu * np.abs(pred).sum())


def train_regressor_admm(x, z, cfg):
    """Fit V minimizing ||Z - X V.T||^2 + lam ||V||^2 + mu ||X V.T||_1.

    Splits on Q = X V.T with a scaled dual variable. The V-step solves a
    ridge system whose Gram matrix ((2 + rho) X.T X + 2 lam I, or the n-side
    twin when n < d) is Cholesky-factored once; the Q-step is elementwise
    soft thresholding. Stops when both primal and dual residuals fall under
    Boyd-style absolute + relative tolerances.
    """
    x = sp.csr_matrix(x)
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or x.shape[0] != z.shape[0]:
        raise InvalidInput(f"X has {x.shape[0]} rows, Z has shape {z.shape}")
    n, d = x.shape
    r = z.shape[1]
    a_coef = 2.0 + cfg.rho
    b_coef = 2.0 * cfg.lam

    if d <= n:
        gram = a_coef * np.asarray((x.T @ x).todense())
        gram[np.diag_indices(d)] += b_coef
        chol = cho_factor(gram, overwrite_a=True)

        def solve_b(c):
            return cho_solve(chol, np.asarray(x.T @ c))

    else:
        gram = a_coef * np.asarray((x @ x.T).todense())
        gram[np.diag_indices(n)] += b_coef
        chol = cho_factor(gram, overwrite_a=True)

        def solve_b(c):
            return np.asarray(x.T @ cho_solve(chol, c))

    q = np.zeros((n, r))
    u = np.zeros((n, r))
    shrink = cfg.mu / cfg.rho
    b = np.zeros((d, r))
    for _ in range(cfg.max_iters):
        b = solve_b(2.0 * z + cfg.rho * (q - u))
        xb = np.asarray(x @ b)
        q_old = q
        q = soft_threshold(xb + u, shrink)
        u = u + xb - q
        r_primal = np.linalg.norm(xb - q)
        s_dual = cfg.rho * np.linalg.norm(np.asarray(x.T @ (q - q_old)))
        eps_primal = np.sqrt(n * r) * cfg.abs_tol + cfg.rel_tol * max(
            np.linalg.norm(xb), np.linalg.norm(q)
        )
        eps_dual = np.sqrt(d * r) * cfg.abs_tol + cfg.rel_tol * cfg.rho * np.linalg.norm(
            np.asarray(x.T @ u)
        )
        if r_primal <= eps_primal and s_dual <= eps_dual:
            break
    return np.ascontiguousarray(b.T)
