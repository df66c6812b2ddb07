"""Shared fixtures-in-code for the test suite.

Holds the flat geometry used to exercise the conjugate-gradient loop in
isolation, finite-difference utilities, planted-problem factories, and the
manifold property checks that both the unit tests and the acceptance suite
run (the latter at higher trial counts).
"""

from __future__ import annotations

import numpy as np

from rxml.fixed_rank import FixedRankManifold
from rxml.local_embedding import NeighborMask, build_neighbor_mask, pattern_gram
from rxml.psd_fixed_rank import PsdFixedRankManifold


class EuclideanManifold:
    """Flat R^n as a geometry contract: points and tangents are 1-d arrays."""

    def __init__(self, n):
        self.n = n

    def riemannian_gradient(self, x, euclid_grad):
        return np.asarray(euclid_grad, dtype=np.float64)

    def metric(self, x, a, b):
        return float(np.vdot(a, b))

    def norm(self, x, a):
        return float(np.linalg.norm(a))

    def zero_tangent(self, x):
        return np.zeros(self.n)

    def retract(self, x, v, t=1.0):
        return x + t * v

    def transport(self, x_from, x_to, v):
        return v


def central_diff(f, eps):
    return (f(eps) - f(-eps)) / (2.0 * eps)


def random_binary_labels(rng, n, l, density=0.3):
    return (rng.uniform(size=(n, l)) < density).astype(float)


def planted_mask(rng, n, r, nbar, well_conditioned=False):
    """A neighbor mask whose targets come from a known rank-r factor.

    The pattern is built from random labels (so it has the same structure
    the pipeline produces); the Gram targets are replaced by those of a
    planted factor, making the completion exactly solvable at rank r.
    """
    y = random_binary_labels(rng, n, 12, 0.35)
    pattern = build_neighbor_mask(y, nbar)
    if well_conditioned:
        q = np.linalg.qr(rng.standard_normal((n, r)))[0]
        z_true = q * rng.uniform(1.0, 2.0, size=r)
    else:
        z_true = rng.standard_normal((n, r))
    mask = NeighborMask(n, pattern.rows, pattern.cols, pattern_gram(pattern, z_true))
    return mask, z_true


def tangent_gap(a, b):
    return (
        np.linalg.norm(a.M - b.M)
        + np.linalg.norm(a.Up - b.Up)
        + np.linalg.norm(a.Vp - b.Vp)
    )


# ---------------------------------------------------------------------------
# Manifold properties. Each check takes an rng, draws one random instance,
# and raises AssertionError on violation. The acceptance suite runs each one
# hundreds of times; unit tests sample them more lightly.
# ---------------------------------------------------------------------------


def _random_fixed_rank(rng):
    d = int(rng.integers(4, 13))
    l = int(rng.integers(3, 11))
    r = int(rng.integers(1, min(d, l) + 1))
    man = FixedRankManifold(d, l, r)
    return man, man.random_point(rng)


def _random_psd(rng):
    n = int(rng.integers(3, 13))
    r = int(rng.integers(1, n + 1))
    man = PsdFixedRankManifold(n, r)
    return man, man.random_point(rng)


def prop_fixed_rank_projector_idempotent(rng):
    man, x = _random_fixed_rank(rng)
    z = rng.standard_normal((man.d, man.l))
    v = man.project_to_tangent(x, z)
    w = man.project_to_tangent(x, man.tangent_to_ambient(x, v).to_dense())
    assert tangent_gap(v, w) <= 1e-9 * max(man.norm(x, v), 1.0)


def prop_fixed_rank_projection_tangent(rng):
    man, x = _random_fixed_rank(rng)
    v = man.project_to_tangent(x, rng.standard_normal((man.d, man.l)))
    man.check_tangent(x, v)


def prop_fixed_rank_transport_tangent(rng):
    man, x = _random_fixed_rank(rng)
    v = man.random_tangent(x, rng)
    y = man.retract(x, man.random_tangent(x, rng), 0.1)
    man.check_tangent(y, man.transport(x, y, v))


def prop_fixed_rank_metric_symmetric_positive(rng):
    man, x = _random_fixed_rank(rng)
    a = man.random_tangent(x, rng, norm=float(rng.uniform(0.5, 3.0)))
    b = man.random_tangent(x, rng, norm=float(rng.uniform(0.5, 3.0)))
    assert man.metric(x, a, b) == man.metric(x, b, a)
    assert man.metric(x, a, a) > 0.0
    assert man.metric(x, man.zero_tangent(x), man.zero_tangent(x)) == 0.0


def prop_fixed_rank_retraction_zero_step(rng):
    man, x = _random_fixed_rank(rng)
    v = man.random_tangent(x, rng)
    assert man.retract(x, v, 0.0) is x
    assert man.retract(x, man.zero_tangent(x), 1.0) is x


def prop_fixed_rank_retraction_second_order(rng):
    man, x = _random_fixed_rank(rng)
    v = man.random_tangent(x, rng)
    amb = man.tangent_to_ambient(x, v).to_dense()
    x_mat = x.to_matrix()

    def gap(t):
        return np.linalg.norm(man.retract(x, v, t).to_matrix() - (x_mat + t * amb))

    g1, g2 = gap(1e-3), gap(1e-4)
    # An O(t^2) gap shrinks ~100x when t shrinks 10x; allow a 3x cushion and
    # a floor for retractions that are numerically exact along this tangent.
    assert g2 <= max(g1 / 30.0, 1e-13)


def prop_psd_horizontal_symmetry(rng):
    man, z = _random_psd(rng)
    h = man.project_horizontal(z, rng.standard_normal(z.Z.shape))
    resid = np.linalg.norm(h.U.T @ z.Z - z.Z.T @ h.U)
    assert resid <= 1e-9 * max(np.linalg.norm(h.U) * np.linalg.norm(z.Z), 1e-12)


def prop_psd_projector_idempotent(rng):
    man, z = _random_psd(rng)
    h = man.project_horizontal(z, rng.standard_normal(z.Z.shape))
    hh = man.project_horizontal(z, h.U)
    assert np.linalg.norm(hh.U - h.U) <= 1e-9 * max(np.linalg.norm(h.U), 1.0)


def prop_psd_vertical_annihilated(rng):
    man, z = _random_psd(rng)
    lam = rng.standard_normal((man.r, man.r))
    vertical = z.Z @ (lam - lam.T)
    residue = man.project_horizontal(z, vertical)
    assert man.norm(z, residue) <= 1e-9 * max(np.linalg.norm(vertical), 1.0)


def prop_psd_metric_symmetric_positive(rng):
    man, z = _random_psd(rng)
    a = man.random_horizontal(z, rng, norm=float(rng.uniform(0.5, 3.0)))
    b = man.random_horizontal(z, rng, norm=float(rng.uniform(0.5, 3.0)))
    assert man.metric(z, a, b) == man.metric(z, b, a)
    assert man.metric(z, a, a) > 0.0


def prop_psd_retraction_zero_step(rng):
    man, z = _random_psd(rng)
    u = man.random_horizontal(z, rng)
    assert man.retract(z, u, 0.0) is z
    assert man.retract(z, man.zero_tangent(z), 1.0) is z


def prop_psd_transport_horizontal(rng):
    man, z = _random_psd(rng)
    u = man.random_horizontal(z, rng)
    z2 = man.retract(z, man.random_horizontal(z, rng), 0.1)
    man.check_horizontal(z2, man.transport(z, z2, u))


MANIFOLD_PROPERTIES = (
    prop_fixed_rank_projector_idempotent,
    prop_fixed_rank_projection_tangent,
    prop_fixed_rank_transport_tangent,
    prop_fixed_rank_metric_symmetric_positive,
    prop_fixed_rank_retraction_zero_step,
    prop_fixed_rank_retraction_second_order,
    prop_psd_horizontal_symmetry,
    prop_psd_projector_idempotent,
    prop_psd_vertical_annihilated,
    prop_psd_metric_symmetric_positive,
    prop_psd_retraction_zero_step,
    prop_psd_transport_horizontal,
)
