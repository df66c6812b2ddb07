"""Embedded geometry of the set of d-by-l matrices with rank exactly r.

A point is stored factored as W = U @ diag(s) @ V.T with orthonormal U
(d, r) and V (l, r) and strictly positive singular values s. A tangent
vector is parameterized by the triple (M, Up, Vp) with U.T @ Up = 0 and
V.T @ Vp = 0; it embeds into the ambient d x l space as

    U @ M @ V.T + Up @ V.T + U @ Vp.T

so the metric inherited from the ambient trace inner product reduces to the
sum of the three blockwise traces. Movement along a tangent is realized by a
rank-2r factorization followed by an SVD of a 2r x 2r core, which truncates
back to the best rank-r point; transport is re-projection onto the new
tangent space. Ambient inputs may be dense arrays, scipy sparse matrices, or
the lazily factored products from :mod:`rxml.ambient`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ambient import ProductAmbient, amb_dot, amb_tdot
from .errors import InvalidInput, RankDeficient, RankDropError
from .linalg import EPS_RANK, canonical_signs

# Absolute orthonormality slack per unit of rank accepted in stored factors.
ORTHO_TOL = 1e-10

# Relative slack accepted when checking tangency constraints.
TANGENT_TOL = 1e-9

_TINY = np.finfo(np.float64).tiny


def _f64(a):
    return np.ascontiguousarray(np.asarray(a, dtype=np.float64))


@dataclass
class FixedRankPoint:
    """Factored rank-r point W = U @ diag(s) @ V.T."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.U = _f64(self.U)
        self.s = _f64(self.s)
        self.V = _f64(self.V)
        if self.U.ndim != 2 or self.V.ndim != 2 or self.s.ndim != 1:
            raise InvalidInput("expected U (d, r), s (r,), V (l, r)")
        r = self.s.shape[0]
        if self.U.shape[1] != r or self.V.shape[1] != r:
            raise InvalidInput("factor widths disagree with the number of singular values")
        for name, a in (("U", self.U), ("s", self.s), ("V", self.V)):
            if not np.all(np.isfinite(a)):
                raise InvalidInput(f"{name} contains non-finite entries")
        if np.any(self.s <= 0.0):
            raise RankDeficient("singular values must be strictly positive")
        tol = ORTHO_TOL * max(r, 1)
        eye = np.eye(r)
        if np.linalg.norm(self.U.T @ self.U - eye) > tol:
            raise InvalidInput("U columns are not orthonormal within tolerance")
        if np.linalg.norm(self.V.T @ self.V - eye) > tol:
            raise InvalidInput("V columns are not orthonormal within tolerance")

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    @property
    def rank(self):
        return int(self.s.shape[0])

    def to_matrix(self):
        return (self.U * self.s) @ self.V.T


@dataclass
class FixedRankTangent:
    """Tangent parameterization (M, Up, Vp); anchored to a point by context."""

    M: np.ndarray
    Up: np.ndarray
    Vp: np.ndarray

    def __post_init__(self):
        self.M = _f64(self.M)
        self.Up = _f64(self.Up)
        self.Vp = _f64(self.Vp)

    def __add__(self, other):
        return FixedRankTangent(self.M + other.M, self.Up + other.Up, self.Vp + other.Vp)

    def __sub__(self, other):
        return FixedRankTangent(self.M - other.M, self.Up - other.Up, self.Vp - other.Vp)

    def __neg__(self):
        return FixedRankTangent(-self.M, -self.Up, -self.Vp)

    def __mul__(self, alpha):
        if not np.isscalar(alpha):
            return NotImplemented
        return FixedRankTangent(alpha * self.M, alpha * self.Up, alpha * self.Vp)

    __rmul__ = __mul__

    def is_zero(self):
        return not (np.any(self.M) or np.any(self.Up) or np.any(self.Vp))


class FixedRankManifold:
    """Geometry operations for one (d, l, r) configuration."""

    def __init__(self, d, l, r):
        if not 1 <= r <= min(d, l):
            raise InvalidInput(f"rank r={r} outside [1, min(d={d}, l={l})]")
        self.d = int(d)
        self.l = int(l)
        self.r = int(r)

    @property
    def dim(self):
        return self.r * (self.d + self.l - self.r)

    # -- validation helpers -------------------------------------------------

    def check_point(self, x):
        if x.shape != (self.d, self.l) or x.rank != self.r:
            raise InvalidInput(
                f"point of shape {x.shape} rank {x.rank} does not live on "
                f"({self.d}, {self.l}) rank {self.r}"
            )

    def check_tangent(self, x, v, tol=TANGENT_TOL):
        """Raise unless U.T @ Up and V.T @ Vp vanish relative to the vector.

        The scale is the norm of the whole tangent triple, not of each
        component: a component can be exactly zero in theory (Vp when
        r == l, for instance) while carrying harmless rounding noise.
        """
        scale = max(self.norm(x, v), _TINY)
        ru = np.linalg.norm(x.U.T @ v.Up)
        rv = np.linalg.norm(x.V.T @ v.Vp)
        if ru > tol * scale:
            raise InvalidInput(f"Up is not orthogonal to the left factor (resid {ru:.3e})")
        if rv > tol * scale:
            raise InvalidInput(f"Vp is not orthogonal to the right factor (resid {rv:.3e})")

    # -- core geometry ------------------------------------------------------

    def project_to_tangent(self, x, z):
        """Orthogonal projection of an ambient matrix onto the tangent space.

        Needs only Z @ V and Z.T @ U, so factored and sparse ambient values
        stay factored: the cost is O((d + l) r^2) plus the two products.
        """
        zv = amb_dot(z, x.V)
        m = x.U.T @ zv
        up = zv - x.U @ m
        ztu = amb_tdot(z, x.U)
        vp = ztu - x.V @ m.T
        return FixedRankTangent(m, up, vp)

    def riemannian_gradient(self, x, euclid_grad):
        """Project the ambient (Euclidean) gradient onto the tangent space."""
        return self.project_to_tangent(x, euclid_grad)

    def metric(self, x, a, b):
        return float(np.vdot(a.M, b.M) + np.vdot(a.Up, b.Up) + np.vdot(a.Vp, b.Vp))

    def norm(self, x, a):
        return float(np.sqrt(max(self.metric(x, a, a), 0.0)))

    def zero_tangent(self, x):
        return FixedRankTangent(
            np.zeros((self.r, self.r)),
            np.zeros((self.d, self.r)),
            np.zeros((self.l, self.r)),
        )

    def tangent_to_ambient(self, x, v):
        """Embed a tangent triple as a width-2r factored ambient matrix."""
        left = np.hstack([x.U @ v.M + v.Up, x.U])
        right = np.hstack([x.V, v.Vp])
        return ProductAmbient(left, right)

    def retract(self, x, v, t=1.0):
        """Move from x along t * v and truncate back to rank r.

        Exact at t = 0. The step is realized on the rank-2r factorization
        [U, Qu] K [V, Qv].T whose core K is 2r x 2r, so one small SVD prices
        the whole update. Raises RankDropError when the step would leave the
        rank-r set (trailing singular value at or below EPS_RANK relative).
        """
        t = float(t)
        if t == 0.0 or v.is_zero():
            return x
        r = self.r
        # Scrub machine-epsilon leakage of Up/Vp along U/V before the QR:
        # for very short tangents the normalization inside QR would otherwise
        # amplify that leakage into the new factors.
        up = v.Up - x.U @ (x.U.T @ v.Up)
        vp = v.Vp - x.V @ (x.V.T @ v.Vp)
        qu, ru = np.linalg.qr(up)
        qv, rv = np.linalg.qr(vp)
        core = np.zeros((2 * r, 2 * r))
        core[:r, :r] = np.diag(x.s) + t * v.M
        core[:r, r:] = t * rv.T
        core[r:, :r] = t * ru
        uc, sc, vct = np.linalg.svd(core)
        if sc[0] <= 0.0 or sc[r - 1] <= EPS_RANK * sc[0]:
            raise RankDropError(
                f"retraction step t={t:.3e} collapses the rank "
                f"(sigma_r={sc[r - 1]:.3e}, sigma_1={sc[0]:.3e})"
            )
        u_new = np.hstack([x.U, qu]) @ uc[:, :r]
        v_new = np.hstack([x.V, qv]) @ vct[:r].T
        u_new, v_new = canonical_signs(u_new, v_new)
        return FixedRankPoint(u_new, sc[:r], v_new)

    def transport(self, x_from, x_to, v):
        """Transport a tangent by projecting its ambient embedding at x_to."""
        return self.project_to_tangent(x_to, self.tangent_to_ambient(x_from, v))

    # -- random elements (tests, initializers) ------------------------------

    def random_point(self, rng, singular_values=None):
        u = np.linalg.qr(rng.standard_normal((self.d, self.r)))[0]
        v = np.linalg.qr(rng.standard_normal((self.l, self.r)))[0]
        if singular_values is None:
            s = np.sort(rng.uniform(1.0, 2.0, size=self.r))[::-1]
        else:
            s = np.sort(np.asarray(singular_values, dtype=np.float64))[::-1]
        return FixedRankPoint(u, s, v)

    def random_tangent(self, x, rng, norm=1.0):
        m = rng.standard_normal((self.r, self.r))
        up = rng.standard_normal((self.d, self.r))
        vp = rng.standard_normal((self.l, self.r))
        up -= x.U @ (x.U.T @ up)
        vp -= x.V @ (x.V.T @ vp)
        v = FixedRankTangent(m, up, vp)
        scale = self.norm(x, v)
        if scale == 0.0:
            return v
        return (norm / scale) * v

    # -- spectral penalty (regularized objectives) ---------------------------

    def penalty(self, x):
        """||W||_F^2 + ||pinv(W)||_F^2 through the stored singular values."""
        if x.s.min() <= EPS_RANK * x.s.max():
            raise RankDeficient("singular values too spread to form the penalty")
        return float(np.sum(x.s**2) + np.sum(x.s**-2.0))

    def penalty_euclidean_gradient(self, x, scale=1.0):
        """Ambient gradient of ``scale * penalty``: 2*scale*(W - U diag(s^-3) V.T)."""
        if x.s.min() <= EPS_RANK * x.s.max():
            raise RankDeficient("singular values too spread to form the penalty")
        coef = 2.0 * scale * (x.s - x.s**-3.0)
        return ProductAmbient(x.U * coef, x.V)
