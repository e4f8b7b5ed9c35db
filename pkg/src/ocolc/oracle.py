"""Offline solvers for the regret comparator x* = argmin over S of the
cumulative loss, with brute-force validators at tiny scale."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from .core import ConvexFn, project_ball
from .problems import ProblemSpec


@dataclass
class OracleResult:
    x: np.ndarray
    value: float  # sum of the given losses at x
    residual: float  # max_i [g_i(x)]_+
    info: dict = field(default_factory=dict)


class OracleError(RuntimeError):
    """Solver failed to reach the feasibility tolerance; best iterate attached."""

    def __init__(self, message: str, best: OracleResult):
        super().__init__(message)
        self.best = best


def _as_loss_list(losses: Union[ConvexFn, Sequence[ConvexFn]]) -> List[ConvexFn]:
    if isinstance(losses, ConvexFn):
        return [losses]
    return list(losses)


def _average_fn(losses: List[ConvexFn]) -> ConvexFn:
    if len(losses) == 1:
        return losses[0]
    T = len(losses)

    def ev(x):
        return sum(f.eval(x) for f in losses) / T

    def sg(x):
        out = np.asarray(losses[0].subgrad(x), dtype=float).copy()
        for f in losses[1:]:
            out += f.subgrad(x)
        return out / T

    return ConvexFn(ev, sg)


def offline_solve(
    problem: ProblemSpec,
    losses: Union[ConvexFn, Sequence[ConvexFn]],
    iters: int = 20000,
    tol: float = 1e-6,
    rho0: float = 1.0,
    max_ramps: int = 20,
) -> OracleResult:
    """Minimize the average loss over the feasible set by exact penalty.

    Projected subgradient descent on F(x) = avg(x) + rho * sum_i [g_i(x)]_+
    inside the ball, with rho doubled until the returned point is feasible to
    `tol`. Stepsize c/sqrt(k), or 1/(H1 k) when the problem is strongly
    convex. Keeps the best iterate by penalized value and also considers the
    tail average of the second half, which is what makes tight tolerances
    reachable on the strongly convex problems. When the problem provides an
    exact feasibility projection it polishes the final point with it.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    loss_list = _as_loss_list(losses)
    avg = _average_fn(loss_list)
    gs = problem.gs
    dom = problem.dom
    R = dom.radius
    H1 = problem.H1

    def violations(x):
        return np.maximum(problem.constraint_values(x), 0.0)

    def penalized(x, rho):
        return avg.eval(x) + rho * float(violations(x).sum())

    def penalty_subgrad(x, rho):
        grad = np.asarray(avg.subgrad(x), dtype=float).copy()
        vals = problem.constraint_values(x)
        for i in np.nonzero(vals > 0.0)[0]:
            grad += rho * np.asarray(gs[i].subgrad(x), dtype=float)
        return grad

    rho = rho0
    x_start = problem.x0()
    best_overall = None
    for ramp in range(max_ramps):
        x = x_start.copy()
        g0 = float(np.linalg.norm(penalty_subgrad(x, rho)))
        c = R / max(g0, 1e-12)
        best_x, best_val = x.copy(), penalized(x, rho)
        tail_sum, tail_count = np.zeros_like(x), 0
        for k in range(1, iters + 1):
            step = (1.0 / (H1 * k)) if H1 else (c / np.sqrt(k))
            x = project_ball(x - step * penalty_subgrad(x, rho), dom)
            val = penalized(x, rho)
            if val < best_val:
                best_val, best_x = val, x.copy()
            if 2 * k > iters:
                tail_sum += x
                tail_count += 1
        if tail_count:
            x_tail = project_ball(tail_sum / tail_count, dom)
            val_tail = penalized(x_tail, rho)
            if val_tail < best_val:
                best_val, best_x = val_tail, x_tail

        candidate = best_x
        if problem.project_feasible is not None:
            polished = project_ball(problem.project_feasible(best_x), dom)
            if penalized(polished, rho) <= best_val + abs(best_val) * 1e-9 + 1e-9:
                candidate = polished

        residual = float(violations(candidate).max(initial=0.0))
        value = float(sum(f.eval(candidate) for f in loss_list))
        result = OracleResult(
            candidate, value, residual, {"rho": rho, "ramps": ramp + 1, "iters": iters}
        )
        if best_overall is None or residual < best_overall.residual:
            best_overall = result
        if residual <= tol:
            return result
        rho *= 2.0
        x_start = best_x  # warm start the next ramp

    raise OracleError(
        f"feasibility {best_overall.residual:.3e} > tol {tol:.3e} after {max_ramps} ramps",
        best_overall,
    )


def grid_oracle(
    problem: ProblemSpec,
    losses: Union[ConvexFn, Sequence[ConvexFn]],
    resolution: float,
) -> OracleResult:
    """Exhaustive search over a feasible grid inside the ball; n <= 3 only.

    Grid coordinates are -R + resolution * k, so halving the resolution keeps
    every coarse point (refinement can only improve the value).
    """
    if problem.n > 3:
        raise ValueError(f"grid oracle limited to n <= 3, got n={problem.n}")
    if not (resolution > 0):
        raise ValueError("resolution must be positive")
    loss_list = _as_loss_list(losses)
    R = problem.dom.radius
    steps = int(np.floor(2.0 * R / resolution)) + 1
    coords = -R + resolution * np.arange(steps)
    grids = np.meshgrid(*([coords] * problem.n), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=1)
    X = X[np.linalg.norm(X, axis=1) <= R]

    feasible = np.ones(len(X), dtype=bool)
    for g in problem.gs:
        if g.eval_many is not None:
            feasible &= g.eval_many(X) <= 0.0
        else:
            feasible &= np.array([g.eval(x) <= 0.0 for x in X])
    X = X[feasible]
    if len(X) == 0:
        raise ValueError("no feasible grid point at this resolution")

    total = np.zeros(len(X))
    for f in loss_list:
        if f.eval_many is not None:
            total += f.eval_many(X)
        else:
            total += np.array([f.eval(x) for x in X])
    i = int(np.argmin(total))
    return OracleResult(X[i], float(total[i]), 0.0, {"points": len(X)})


# ---------------------------------------------------------------------------
# Dykstra alternating projections onto the doubly stochastic polytope
# ---------------------------------------------------------------------------


def _proj_rows(X):
    return X - (X.sum(axis=1, keepdims=True) - 1.0) / X.shape[1]


def _proj_cols(X):
    return X - (X.sum(axis=0, keepdims=True) - 1.0) / X.shape[0]


def _proj_nonneg(X):
    return np.maximum(X, 0.0)


def project_birkhoff(M: np.ndarray, iters: int = 20000, tol: float = 1e-12) -> np.ndarray:
    """Euclidean projection of a square matrix onto the doubly stochastic set,
    by Dykstra's algorithm over {row sums 1}, {column sums 1}, {X >= 0}."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    X = M.copy()
    incs = [np.zeros_like(X) for _ in range(3)]
    projs = (_proj_rows, _proj_cols, _proj_nonneg)
    for _ in range(iters):
        X_prev = X
        for i, proj in enumerate(projs):
            Y = X + incs[i]
            X = proj(Y)
            incs[i] = Y - X
        if np.max(np.abs(X - X_prev)) < tol:
            break
    return X


def offline_value(
    problem: ProblemSpec, seed: int, T: int, iters: int = 20000, tol: float = 1e-6
) -> OracleResult:
    """Cumulative optimal loss sum_t f_t(x*) for a realized stream.

    Uses the problem's closed-form average loss, and the problem-specific
    exact solver when one exists (the matrix problem's optimum is the
    projection of the mean target onto the polytope); otherwise the penalty
    solver. The returned value is scaled back to the T-step sum.
    """
    fbar = problem.mean_loss(seed, T)
    if problem.offline_solution is not None:
        x_star = problem.offline_solution(seed, T)
        residual = float(np.maximum(problem.constraint_values(x_star), 0.0).max(initial=0.0))
        return OracleResult(x_star, T * fbar.eval(x_star), residual, {"solver": "structural"})
    res = offline_solve(problem, fbar, iters=iters, tol=tol)
    return OracleResult(res.x, T * fbar.eval(res.x), res.residual, res.info | {"solver": "penalty"})
