"""Built-in consistency checks runnable from the command line.

Each check is a named function in a registry, grouped into categories
(manifold, gradient, solver, metrics). Checks deliberately call the public
module attributes rather than locally imported references, so a broken or
monkeypatched implementation is caught.
"""

from __future__ import annotations

import numpy as np

from . import fixed_rank as fr
from . import global_model as gm
from . import linalg
from . import local_embedding as le
from . import metrics as mt
from . import psd_fixed_rank as pf
from . import rcg as rc

_CENTRAL_DIFF_H = 1e-6


def _central_diff(f, t=_CENTRAL_DIFF_H):
    return (f(t) - f(-t)) / (2.0 * t)


def check_fixed_rank_projection(rng):
    man = fr.FixedRankManifold(9, 7, 3)
    x = man.random_point(rng)
    z = rng.standard_normal((9, 7))
    v = man.project_to_tangent(x, z)
    man.check_tangent(x, v)
    w = man.project_to_tangent(x, man.tangent_to_ambient(x, v).to_dense())
    gap = np.linalg.norm((w - v).M) + np.linalg.norm((w - v).Up) + np.linalg.norm((w - v).Vp)
    assert gap <= 1e-10 * max(man.norm(x, v), 1.0), f"projection not idempotent: {gap:.2e}"


def check_fixed_rank_retraction(rng):
    man = fr.FixedRankManifold(8, 6, 2)
    x = man.random_point(rng)
    v = man.random_tangent(x, rng)
    amb = man.tangent_to_ambient(x, v).to_dense()
    x_mat = x.to_matrix()

    def err(t):
        return np.linalg.norm(man.retract(x, v, t).to_matrix() - (x_mat + t * amb))

    e1, e2 = err(1e-3), err(1e-4)
    assert e2 <= max(e1 / 30.0, 1e-14), f"retraction not first order: {e1:.2e} -> {e2:.2e}"


def check_psd_horizontal_projection(rng):
    man = pf.PsdFixedRankManifold(8, 3)
    z = man.random_point(rng)
    h = man.project_horizontal(z, rng.standard_normal((8, 3)))
    man.check_horizontal(z, h)
    lam = rng.standard_normal((3, 3))
    vertical = z.Z @ (lam - lam.T)
    residue = man.project_horizontal(z, vertical)
    assert man.norm(z, residue) <= 1e-9 * max(np.linalg.norm(vertical), 1.0), (
        "vertical directions must project to zero"
    )


def check_psd_retraction(rng):
    man = pf.PsdFixedRankManifold(7, 2)
    z = man.random_point(rng)
    u = man.project_horizontal(z, rng.standard_normal((7, 2)))
    m0 = z.to_matrix()
    expected = z.Z @ u.U.T + u.U @ z.Z.T

    def along(t):
        return man.retract(z, u, t).to_matrix()

    diff = (along(1e-6) - along(-1e-6)) / 2e-6
    gap = np.linalg.norm(diff - expected)
    assert gap <= 1e-5 * max(np.linalg.norm(expected), 1.0), f"retraction derivative off: {gap:.2e}"
    assert np.linalg.norm(along(0.0) - m0) == 0.0


def check_global_gradient(rng):
    x = rng.standard_normal((20, 6))
    y = rng.standard_normal((20, 5))
    prob = gm.GlobalProblem(x, y, r=2)
    man = prob.manifold
    w = man.random_point(rng)
    direction = rng.standard_normal((6, 5))
    grad = prob.euclidean_gradient(w)
    analytic = float(np.vdot(grad.to_dense(), direction))
    w_mat = w.to_matrix()

    def f(t):
        shifted = w_mat + t * direction
        resid = x @ shifted - prob.y_dense
        return float(np.vdot(resid, resid))

    numeric = _central_diff(f)
    assert abs(numeric - analytic) <= 1e-5 * max(abs(analytic), 1.0), (
        f"gradient mismatch: analytic {analytic:.6e}, numeric {numeric:.6e}"
    )


def check_masked_gradient(rng):
    y = (rng.uniform(size=(15, 8)) < 0.3).astype(float)
    mask = le.build_neighbor_mask(y, 5)
    z = rng.standard_normal((15, 3))
    direction = rng.standard_normal((15, 3))
    analytic = float(np.vdot(le.masked_gradient(mask, z), direction))
    numeric = _central_diff(lambda t: le.masked_objective(mask, z + t * direction))
    assert abs(numeric - analytic) <= 1e-5 * max(abs(analytic), 1.0), (
        f"masked gradient mismatch: analytic {analytic:.6e}, numeric {numeric:.6e}"
    )


def check_penalty_gradients(rng):
    man = pf.PsdFixedRankManifold(6, 2)
    z = man.random_point(rng)
    direction = rng.standard_normal((6, 2))
    grad = man.penalty_euclidean_gradient(z, 1.0)
    analytic = float(np.vdot(grad, direction))
    numeric = _central_diff(lambda t: man.penalty(pf.PsdPoint(z.Z + t * direction)))
    assert abs(numeric - analytic) <= 1e-4 * max(abs(analytic), 1.0), (
        f"penalty gradient mismatch: analytic {analytic:.6e}, numeric {numeric:.6e}"
    )


def check_sylvester(rng):
    a = rng.standard_normal((5, 5))
    s = a @ a.T + 5.0 * np.eye(5)
    c_raw = rng.standard_normal((5, 5))
    c = c_raw - c_raw.T
    e = linalg.solve_sylvester_sym(s, c)
    resid = np.linalg.norm(e @ s + s @ e - c)
    assert resid <= 1e-9 * max(np.linalg.norm(c), 1.0), f"sylvester residual {resid:.2e}"


def check_rcg_matches_closed_form(rng):
    x = rng.standard_normal((30, 8))
    y = rng.standard_normal((30, 6))
    prob = gm.GlobalProblem(x, y, r=2)
    best = gm.global_closed_form(prob)
    f_best = prob.objective(best)
    w0 = prob.manifold.random_point(rng)
    point, _ = rc.rcg_minimize(
        prob.rcg_problem(), w0, rc.RcgConfig(max_iters=300, grad_tol=1e-10)
    )
    f_rcg = prob.objective(point)
    rel = (f_rcg - f_best) / max(abs(f_best), 1.0)
    assert rel <= 1e-4, f"iterative optimum {f_rcg:.8e} vs direct {f_best:.8e} (rel {rel:.2e})"


def check_svp_fits_planted(rng):
    z_true = rng.standard_normal((20, 2))
    y = (rng.uniform(size=(20, 6)) < 0.4).astype(float)
    mask = le.build_neighbor_mask(y, 6)
    planted = le.NeighborMask(
        mask.n, mask.rows, mask.cols, le.pattern_gram(mask, z_true)
    )
    result = le.solve_embedding_svp(planted, 2, max_iters=500)
    assert result.final_objective <= 1e-6 * max(planted.target_norm_sq(), 1.0), (
        f"planted fit residual {result.final_objective:.2e}"
    )


def check_admm_matches_ridge(rng):
    x = rng.standard_normal((25, 7))
    z = rng.standard_normal((25, 3))
    cfg = le.AdmmConfig(
        lam=0.5, mu=0.0, rho=1.0, max_iters=200, abs_tol=1e-10, rel_tol=1e-10
    )
    v = le.train_regressor_admm(x, z, cfg)
    direct = np.linalg.solve(2.0 * x.T @ x + 2.0 * cfg.lam * np.eye(7), 2.0 * x.T @ z).T
    gap = np.linalg.norm(v - direct) / max(np.linalg.norm(direct), 1.0)
    assert gap <= 1e-6, f"quadratic-only fit differs from direct solve by {gap:.2e}"


def check_precision_hand_example(_rng):
    pred = np.array([[0, 2, 4], [1, 3, 0], [5, 4, 3]])
    truth = np.zeros((3, 6))
    truth[0, [0, 2]] = 1
    truth[1, [2]] = 1
    truth[2, [3, 4, 5]] = 1
    assert mt.precision_at_k(pred, truth, 1) == (1 + 0 + 1) / 3
    expected3 = (2 / 3 + 0.0 + 1.0) / 3
    assert abs(mt.precision_at_k(pred, truth, 3) - expected3) <= 1e-12


def check_ndcg_hand_example(_rng):
    pred = np.array([[1, 0, 3], [2, 1, 0]])
    truth = np.zeros((2, 4))
    truth[0, [0, 3]] = 1
    truth[1, [2]] = 1
    d2, d3 = 1.0 / np.log2(3.0), 1.0 / np.log2(4.0)
    ideal0 = 1.0 + d2
    expected = ((d2 + d3) / ideal0 + 1.0) / 2
    assert abs(mt.ndcg_at_k(pred, truth, 3) - expected) <= 1e-12


CHECKS = (
    ("fixed_rank_projection", "manifold", check_fixed_rank_projection),
    ("fixed_rank_retraction", "manifold", check_fixed_rank_retraction),
    ("psd_horizontal_projection", "manifold", check_psd_horizontal_projection),
    ("psd_retraction", "manifold", check_psd_retraction),
    ("global_gradient", "gradient", check_global_gradient),
    ("masked_gradient", "gradient", check_masked_gradient),
    ("penalty_gradients", "gradient", check_penalty_gradients),
    ("sylvester", "solver", check_sylvester),
    ("rcg_matches_closed_form", "solver", check_rcg_matches_closed_form),
    ("svp_fits_planted", "solver", check_svp_fits_planted),
    ("admm_matches_ridge", "solver", check_admm_matches_ridge),
    ("precision_hand_example", "metrics", check_precision_hand_example),
    ("ndcg_hand_example", "metrics", check_ndcg_hand_example),
)


def run_selftest(name_filter=None, emit=print):
    """Run all checks, or only those whose category or name contains the
    filter string; returns (n_passed, n_failed)."""
    passed = failed = 0
    for name, category, fn in CHECKS:
        if name_filter and name_filter not in name and name_filter not in category:
            continue
        rng = np.random.default_rng(12345)
        try:
            fn(rng)
        except Exception as exc:  # report and continue with the remaining checks
            failed += 1
            emit(f"FAIL {name} ({category}): {exc}")
        else:
            passed += 1
            emit(f"PASS {name} ({category})")
    emit(f"selftest: {passed} passed, {failed} failed")
    return passed, failed
