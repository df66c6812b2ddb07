"""Rank-constrained least squares: objective, gradient, closed form, solver."""

import numpy as np
import pytest
import scipy.sparse as sp

from helpers import central_diff
from rxml.ambient import amb_to_dense
from rxml.errors import InvalidInput, RankDeficient
from rxml.global_model import GlobalProblem, global_closed_form
from rxml.linalg import thin_svd
from rxml.rcg import RcgConfig, rcg_minimize


def random_problem(rng, n, d, l, r):
    x = rng.standard_normal((n, d))
    y = rng.standard_normal((n, l))
    return GlobalProblem(sp.csr_matrix(x), sp.csr_matrix(y), r), x, y


class TestProblemBasics:
    def test_shape_and_validation(self):
        prob, _, _ = random_problem(np.random.default_rng(0), 12, 6, 5, 2)
        assert prob.shape == (12, 6, 5)
        with pytest.raises(InvalidInput):
            GlobalProblem(sp.eye(4, 6, format="csr"), sp.eye(5, 3, format="csr"), 1)
        with pytest.raises(InvalidInput):
            GlobalProblem(sp.eye(4, 6, format="csr"), sp.eye(4, 3, format="csr"), 4)
        with pytest.raises(InvalidInput):
            GlobalProblem(sp.eye(4, 6, format="csr"), sp.eye(4, 3, format="csr"), 0)

    def test_objective_matches_dense_formula(self):
        rng = np.random.default_rng(1)
        prob, x, y = random_problem(rng, 15, 7, 6, 3)
        w = prob.manifold.random_point(rng)
        expect = float(np.linalg.norm(x @ w.to_matrix() - y) ** 2)
        assert prob.objective(w) == pytest.approx(expect, rel=1e-12)

    def test_gradient_matches_dense_formula(self):
        rng = np.random.default_rng(2)
        prob, x, y = random_problem(rng, 15, 7, 6, 3)
        w = prob.manifold.random_point(rng)
        expect = 2.0 * x.T @ (x @ w.to_matrix() - y)
        np.testing.assert_allclose(
            amb_to_dense(prob.euclidean_gradient(w)), expect, atol=1e-10
        )

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        prob, _, _ = random_problem(rng, 12, 6, 5, 2)
        man = prob.manifold
        w = man.random_point(rng)
        grad = amb_to_dense(prob.euclidean_gradient(w))
        for _ in range(6):
            v = man.random_tangent(w, rng)
            amb = man.tangent_to_ambient(w, v).to_dense()
            num = central_diff(lambda t: prob.objective(man.retract(w, v, t)), 1e-6)
            assert num == pytest.approx(float(np.vdot(grad, amb)), rel=1e-6, abs=1e-9)


class TestClosedForm:
    def test_full_rank_case_matches_unconstrained_least_squares(self):
        # When r = min(d, l) the rank constraint is inactive and the optimum
        # is the plain least-squares solution, computed here independently.
        rng = np.random.default_rng(4)
        prob, x, y = random_problem(rng, 20, 6, 8, 6)
        w = global_closed_form(prob)
        w_ref = np.linalg.lstsq(x, y, rcond=None)[0]
        np.testing.assert_allclose(w.to_matrix(), w_ref, atol=1e-9)

    def test_orthonormal_features_reduce_to_truncation(self):
        # With orthonormal columns, X W - Y is minimized by the best rank-r
        # approximation of X.T Y (Frobenius projection).
        rng = np.random.default_rng(5)
        q = np.linalg.qr(rng.standard_normal((25, 6)))[0]
        y = rng.standard_normal((25, 7))
        prob = GlobalProblem(sp.csr_matrix(q), sp.csr_matrix(y), 3)
        w = global_closed_form(prob)
        expect = thin_svd(q.T @ y, 3).to_matrix()
        np.testing.assert_allclose(w.to_matrix(), expect, atol=1e-9)

    def test_planted_low_rank_model_is_recovered(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((30, 8))
        w_true = rng.standard_normal((8, 2)) @ rng.standard_normal((2, 9))
        y = x @ w_true
        prob = GlobalProblem(sp.csr_matrix(x), sp.csr_matrix(y), 2)
        w = global_closed_form(prob)
        assert prob.objective(w) <= 1e-18 * np.linalg.norm(y) ** 2
        np.testing.assert_allclose(w.to_matrix(), w_true, atol=1e-9)

    def test_stationarity_of_solution(self):
        # The projected (Riemannian) gradient must vanish at the optimum.
        rng = np.random.default_rng(7)
        prob, _, _ = random_problem(rng, 25, 7, 6, 2)
        w = global_closed_form(prob)
        man = prob.manifold
        g = man.riemannian_gradient(w, prob.euclidean_gradient(w))
        g0 = np.linalg.norm(amb_to_dense(prob.euclidean_gradient(w)))
        assert man.norm(w, g) <= 1e-9 * max(g0, 1.0)

    def test_beats_every_perturbation(self):
        rng = np.random.default_rng(8)
        prob, _, _ = random_problem(rng, 18, 6, 5, 2)
        w = global_closed_form(prob)
        f_star = prob.objective(w)
        man = prob.manifold
        for _ in range(10):
            v = man.random_tangent(w, rng, norm=float(rng.uniform(0.01, 1.0)))
            assert prob.objective(man.retract(w, v, 1.0)) >= f_star - 1e-10

    def test_size_gate(self):
        x = sp.random(2000, 600, density=1e-3, format="csr", random_state=0)
        y = sp.random(2000, 5, density=1e-2, format="csr", random_state=1)
        prob = GlobalProblem(x, y, 2)
        with pytest.raises(InvalidInput):
            global_closed_form(prob)

    def test_wide_feature_matrix_rejected(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((5, 8))
        y = rng.standard_normal((5, 4))
        prob = GlobalProblem(sp.csr_matrix(x), sp.csr_matrix(y), 2)
        with pytest.raises(RankDeficient):
            global_closed_form(prob)


class TestManifoldSolverAgainstClosedForm:
    def test_solver_reaches_closed_form_objective(self):
        rng = np.random.default_rng(10)
        for trial in range(3):
            n = int(rng.integers(25, 60))
            d = int(rng.integers(6, 14))
            l = int(rng.integers(5, 12))
            r = int(rng.integers(1, min(d, l)))
            prob, _, _ = random_problem(rng, n, d, l, r)
            w_star = global_closed_form(prob)
            f_star = prob.objective(w_star)
            x0 = prob.manifold.random_point(np.random.default_rng(100 + trial))
            w, trace = rcg_minimize(
                prob.rcg_problem(), x0, RcgConfig(max_iters=2000, grad_tol=1e-12)
            )
            assert prob.objective(w) <= f_star * (1 + 1e-6)
