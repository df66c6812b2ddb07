"""Quotient geometry of rank-r positive semidefinite n x n matrices.

A point M = Z @ Z.T is represented by a full-rank factor Z (n, r). The
factorization is invariant under Z -> Z @ O for orthogonal O, so directions
along that orbit carry no information; the usable directions form the
horizontal space

    H_Z = { U in R^{n x r} : U.T @ Z symmetric }

which is the orthogonal complement of the vertical orbit directions
{ Z @ L : L skew }. Projection onto H_Z subtracts Z @ E where E solves the
small Sylvester equation E (Z.T Z) + (Z.T Z) E = Z.T H - H.T Z. Retraction
is the straight factor step Z + t U (with a full-rank check), and transport
re-projects at the destination point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, RankDeficient, RankDropError
from .linalg import EPS_RANK, solve_sylvester_sym

# Relative symmetry slack accepted for horizontal vectors.
HORIZ_TOL = 1e-9

_TINY = np.finfo(np.float64).tiny


@dataclass
class PsdPoint:
    """Full-rank factor Z of the PSD matrix M = Z @ Z.T."""

    Z: np.ndarray

    def __post_init__(self):
        self.Z = np.ascontiguousarray(np.asarray(self.Z, dtype=np.float64))
        if self.Z.ndim != 2:
            raise InvalidInput(f"Z must be 2-d, got ndim={self.Z.ndim}")
        n, r = self.Z.shape
        if not 1 <= r <= n:
            raise InvalidInput(f"factor shape {self.Z.shape} admits no rank-{r} PSD point")
        if not np.all(np.isfinite(self.Z)):
            raise InvalidInput("Z contains non-finite entries")
        svals = np.linalg.svd(self.Z, compute_uv=False)
        if svals[0] <= 0.0 or svals[-1] <= EPS_RANK * svals[0]:
            raise RankDeficient(
                f"factor is rank deficient (sigma_min={svals[-1]:.3e}, sigma_max={svals[0]:.3e})"
            )

    @property
    def n(self):
        return self.Z.shape[0]

    @property
    def r(self):
        return self.Z.shape[1]

    def to_matrix(self):
        return self.Z @ self.Z.T


@dataclass
class HorizontalVector:
    """A horizontal direction at some PsdPoint (U.T @ Z symmetric)."""

    U: np.ndarray

    def __post_init__(self):
        self.U = np.ascontiguousarray(np.asarray(self.U, dtype=np.float64))

    def __add__(self, other):
        return HorizontalVector(self.U + other.U)

    def __sub__(self, other):
        return HorizontalVector(self.U - other.U)

    def __neg__(self):
        return HorizontalVector(-self.U)

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        return HorizontalVector(alpha * self.U)

    __rmul__ = __mul__

    def is_zero(self):
        return not np.any(self.U)


class PsdFixedRankManifold:
    """Geometry operations for rank-r PSD matrices of size n."""

    def __init__(self, n, r):
        if not 1 <= r <= n:
            raise InvalidInput(f"rank r={r} outside [1, n={n}]")
        self.n = int(n)
        self.r = int(r)

    @property
    def dim(self):
        return self.n * self.r - self.r * (self.r - 1) // 2

    def check_point(self, z):
        if (z.n, z.r) != (self.n, self.r):
            raise InvalidInput(f"point of shape {z.Z.shape} does not match ({self.n}, {self.r})")

    def check_horizontal(self, z, u, tol=HORIZ_TOL):
        """Raise unless U.T @ Z is symmetric to relative tolerance."""
        umat = u.U if isinstance(u, HorizontalVector) else np.asarray(u, dtype=np.float64)
        resid = np.linalg.norm(umat.T @ z.Z - z.Z.T @ umat)
        bound = tol * max(np.linalg.norm(umat) * np.linalg.norm(z.Z), _TINY)
        if resid > bound:
            raise InvalidInput(f"vector is not horizontal (symmetry resid {resid:.3e})")

    # -- core geometry ------------------------------------------------------

    def project_horizontal(self, z, h):
        """Orthogonal projection of an n x r direction onto the horizontal space."""
        hmat = h.U if isinstance(h, HorizontalVector) else np.asarray(h, dtype=np.float64)
        if hmat.shape != z.Z.shape:
            raise InvalidInput(f"direction shape {hmat.shape} does not match point {z.Z.shape}")
        gram = z.Z.T @ z.Z
        skew = z.Z.T @ hmat - hmat.T @ z.Z
        e = solve_sylvester_sym(gram, skew)
        return HorizontalVector(hmat - z.Z @ e)

    def riemannian_gradient(self, z, euclid_grad):
        """Scrub the factor-space gradient back onto the horizontal space.

        In exact arithmetic the Euclidean gradient of an orbit-invariant
        objective is already horizontal; the projection removes numerical
        drift only.
        """
        return self.project_horizontal(z, euclid_grad)

    def metric(self, z, a, b):
        return float(np.vdot(a.U, b.U))

    def norm(self, z, a):
        return float(np.linalg.norm(a.U))

    def zero_tangent(self, z):
        return HorizontalVector(np.zeros((self.n, self.r)))

    def retract(self, z, u, t=1.0):
        """Step straight in factor space: Z + t * U, with a full-rank check."""
        t = float(t)
        if t == 0.0 or u.is_zero():
            return z
        try:
            return PsdPoint(z.Z + t * u.U)
        except RankDeficient as exc:
            raise RankDropError(f"retraction step t={t:.3e} left the rank-{self.r} set") from exc

    def transport(self, z_from, z_to, u):
        return self.project_horizontal(z_to, u.U)

    # -- random elements (tests, initializers) ------------------------------

    def random_point(self, rng, scale=1.0):
        return PsdPoint(scale * rng.standard_normal((self.n, self.r)))

    def random_horizontal(self, z, rng, norm=1.0):
        v = self.project_horizontal(z, rng.standard_normal((self.n, self.r)))
        scale = self.norm(z, v)
        if scale == 0.0:
            return v
        return (norm / scale) * v

    # -- spectral penalty (regularized objectives) ---------------------------

    def penalty(self, z):
        """||M||_F^2 + ||pinv(M)||_F^2 for M = Z Z.T, via singular values of Z."""
        svals = np.linalg.svd(z.Z, compute_uv=False)
        if svals[-1] <= EPS_RANK * svals[0]:
            raise RankDeficient("factor too ill-conditioned to form the penalty")
        return float(np.sum(svals**4) + np.sum(svals**-4.0))

    def penalty_euclidean_gradient(self, z, scale=1.0):
        """Factor-space gradient of ``scale * penalty``: 4*scale*Z*((Z.T Z) - (Z.T Z)^-3)."""
        gram = z.Z.T @ z.Z
        w, q = np.linalg.eigh(gram)
        if w[0] <= EPS_RANK * w[-1]:
            raise RankDeficient("factor too ill-conditioned to form the penalty")
        gram_minus3 = (q * w**-3.0) @ q.T
        return 4.0 * scale * (z.Z @ (gram - gram_minus3))
