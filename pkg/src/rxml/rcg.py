"""Conjugate-gradient minimization over a manifold geometry contract.

The loop is the Polak-Ribiere+ scheme with projection-based vector
transport: at each iterate the new direction is the negative Riemannian
gradient plus beta times the transported previous direction, where

    beta = max(0, <P_k - T(P_{k-1}), P_k> / <P_{k-1}, P_{k-1}>)

with T the transport from the previous iterate. Steps come from Armijo
backtracking; a direction that fails to be a descent direction is reset to
steepest descent, and a failed line search on an already-reset direction
terminates the run with the best (current) iterate. Any geometry exposing
``riemannian_gradient``, ``metric``, ``norm``, ``retract``, ``transport`` and
``zero_tangent`` can be plugged in; tangent values must support ``+`` and
scalar ``*``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ambient import ambient_sum
from .errors import InvalidInput, RankDropError

_TINY = np.finfo(np.float64).tiny


class TerminationReason(str, enum.Enum):
    GRAD_TOL = "grad_tol"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAIL = "line_search_fail"


@dataclass
class RcgConfig:
    """Knobs for :func:`rcg_minimize`.

    ``grad_tol`` is relative to the gradient norm at the starting point.
    ``beta_rule`` selects the conjugacy update: ``"pr+"`` (default) transports
    the previous gradient; ``"literal"`` instead transports the current
    gradient and normalizes by the current gradient norm, which under
    projection transport collapses beta to ~0 (steepest descent). It exists
    for side-by-side comparison.
    """

    max_iters: int = 30
    grad_tol: float = 1e-6
    armijo_sufficient_decrease: float = 1e-4
    armijo_contraction: float = 0.5
    armijo_max_backtracks: int = 25
    regularizer_mu: float = 0.0
    beta_rule: str = "pr+"

    def __post_init__(self):
        if self.max_iters < 0:
            raise InvalidInput("max_iters must be >= 0")
        if self.grad_tol < 0:
            raise InvalidInput("grad_tol must be >= 0")
        if not 0.0 < self.armijo_sufficient_decrease < 1.0:
            raise InvalidInput("armijo_sufficient_decrease must lie in (0, 1)")
        if not 0.0 < self.armijo_contraction < 1.0:
            raise InvalidInput("armijo_contraction must lie in (0, 1)")
        if self.armijo_max_backtracks < 0:
            raise InvalidInput("armijo_max_backtracks must be >= 0")
        if not 0.0 <= self.regularizer_mu < 1.0:
            raise InvalidInput("regularizer_mu must lie in [0, 1)")
        if self.beta_rule not in ("pr+", "literal"):
            raise InvalidInput(f"unknown beta_rule {self.beta_rule!r}")


@dataclass
class IterationRecord:
    """One accepted step: objective after the step, gradient norm, step data."""

    objective: float
    grad_norm: float
    step: float
    backtracks: int
    dir_slope: float


@dataclass
class RcgTrace:
    iterations: list = field(default_factory=list)
    reason: TerminationReason | None = None
    notes: list = field(default_factory=list)

    @property
    def objectives(self):
        return [rec.objective for rec in self.iterations]

    def __len__(self):
        return len(self.iterations)


@dataclass(frozen=True)
class Problem:
    """An objective over a manifold, with its ambient (Euclidean) gradient."""

    manifold: object
    objective: Callable
    euclidean_gradient: Callable


def regularized_objective(problem, mu):
    """Wrap a problem with the spectral penalty mu^2 (||X||_F^2 + ||pinv(X)||_F^2).

    The penalty keeps iterates away from the rank boundary, where the
    fixed-rank sets are not closed. ``mu = 0`` returns the problem unchanged.
    """
    if not 0.0 <= mu < 1.0:
        raise InvalidInput("mu must lie in [0, 1)")
    if mu == 0.0:
        return problem
    man = problem.manifold
    mu2 = mu * mu

    def objective(x):
        return problem.objective(x) + mu2 * man.penalty(x)

    def euclidean_gradient(x):
        base = problem.euclidean_gradient(x)
        pen = man.penalty_euclidean_gradient(x, scale=mu2)
        if isinstance(base, np.ndarray) and isinstance(pen, np.ndarray):
            return base + pen
        return ambient_sum(base, pen)

    return Problem(man, objective, euclidean_gradient)


class _LineSearchFailure(Exception):
    pass


def line_search_armijo(problem, x, direction, f_x, dir_slope, cfg, initial_step):
    """Backtracking Armijo search along a retracted direction.

    Tries initial_step, then contracts; the first trial satisfying

        f(R_x(t * direction)) <= f_x + c1 * t * dir_slope

    is accepted (so the returned step is the largest tested acceptable one).
    A rank drop inside the retraction counts as a failed trial and halves the
    step like any other backtrack. Returns (step, new_point, new_value,
    backtracks) or raises after exhausting the budget.
    """
    assert dir_slope < 0.0, "line search requires a descent direction"
    t = float(initial_step)
    c1 = cfg.armijo_sufficient_decrease
    man = problem.manifold
    for attempt in range(cfg.armijo_max_backtracks + 1):
        try:
            candidate = man.retract(x, direction, t)
        except RankDropError:
            t *= cfg.armijo_contraction
            continue
        f_new = problem.objective(candidate)
        if f_new <= f_x + c1 * t * dir_slope:
            return t, candidate, f_new, attempt
        t *= cfg.armijo_contraction
    raise _LineSearchFailure(
        f"no acceptable step within {cfg.armijo_max_backtracks} backtracks"
    )


def rcg_minimize(problem, x0, cfg=None):
    """Minimize a problem over its manifold starting from x0.

    Returns ``(point, trace)`` where the trace holds one record per accepted
    step plus the termination reason. Objective values along accepted steps
    are strictly decreasing (Armijo). ``cfg.max_iters = 0`` returns x0
    untouched with an empty trace.
    """
    cfg = cfg if cfg is not None else RcgConfig()
    if cfg.regularizer_mu > 0.0:
        problem = regularized_objective(problem, cfg.regularizer_mu)
    man = problem.manifold
    trace = RcgTrace()
    x = x0
    if cfg.max_iters == 0:
        trace.reason = TerminationReason.MAX_ITERS
        return x, trace

    f = problem.objective(x)
    grad = man.riemannian_gradient(x, problem.euclidean_gradient(x))
    grad_norm = man.norm(x, grad)
    tol = cfg.grad_tol * grad_norm

    x_prev = None
    grad_prev = None
    dir_prev = None
    gnormsq_prev = 0.0
    alpha_prev = None
    reason = TerminationReason.MAX_ITERS

    for _ in range(cfg.max_iters):
        if grad_norm <= tol:
            reason = TerminationReason.GRAD_TOL
            break

        if dir_prev is None:
            direction = -1.0 * grad
            is_reset = True
        else:
            if cfg.beta_rule == "literal":
                zk = grad + (-1.0) * man.transport(x_prev, x, grad)
                denom = grad_norm**2
            else:
                zk = grad + (-1.0) * man.transport(x_prev, x, grad_prev)
                denom = gnormsq_prev
            beta = max(0.0, man.metric(x, zk, grad) / denom) if denom > 0.0 else 0.0
            direction = (-1.0) * grad + beta * man.transport(x_prev, x, dir_prev)
            is_reset = False

        dir_slope = man.metric(x, grad, direction)
        if dir_slope >= 0.0:
            direction = -1.0 * grad
            dir_slope = -(grad_norm**2)
            is_reset = True

        if alpha_prev is not None:
            initial_step = 2.0 * alpha_prev
        else:
            initial_step = 1.0 / max(man.norm(x, direction), _TINY)

        try:
            alpha, x_new, f_new, backtracks = line_search_armijo(
                problem, x, direction, f, dir_slope, cfg, initial_step
            )
        except _LineSearchFailure:
            if is_reset:
                reason = TerminationReason.LINE_SEARCH_FAIL
                break
            direction = -1.0 * grad
            dir_slope = -(grad_norm**2)
            try:
                alpha, x_new, f_new, backtracks = line_search_armijo(
                    problem, x, direction, f, dir_slope, cfg, 1.0 / max(grad_norm, _TINY)
                )
            except _LineSearchFailure:
                reason = TerminationReason.LINE_SEARCH_FAIL
                break

        trace.iterations.append(
            IterationRecord(f_new, grad_norm, alpha, backtracks, dir_slope)
        )
        x_prev = x
        grad_prev = grad
        gnormsq_prev = grad_norm**2
        dir_prev = direction
        alpha_prev = alpha
        x, f = x_new, f_new
        grad = man.riemannian_gradient(x, problem.euclidean_gradient(x))
        grad_norm = man.norm(x, grad)

    trace.reason = reason
    return x, trace
