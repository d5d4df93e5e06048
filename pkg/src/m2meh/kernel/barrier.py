"""Log-barrier interior-point method for smooth inequality-constrained problems.

Problems are given as callables (objective value + gradient, constraint
blocks returning values and Jacobians with the g(x) <= 0 convention) plus box
bounds.  Hessians are never required analytically: each centering stage uses
a finite-difference Hessian of the barrier gradient, switching to BFGS
updates between refreshes for larger problems.  A phase-1 pass (minimizing
the maximum constraint violation) runs automatically when the start point is
not strictly feasible.

The method tracks the best feasible iterate by true objective and reports
stage objectives, so callers relying on monotone descent from a warm start
get it structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from m2meh.params import SolverConfig

Evaluator = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
START_INFEASIBLE = "start_infeasible"

_BIG_BFGS_DIM = 16


@dataclass(frozen=True)
class ConstraintBlock:
    """A family of inequality constraints g(x) <= 0.

    eval_fn returns (values, jacobian) with shapes (m,) and (m, n).  Values
    should already be scaled to O(1) magnitudes by the builder.
    """

    name: str
    eval_fn: Evaluator
    size: int


@dataclass(frozen=True)
class ConvexProblem:
    dim: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    blocks: tuple[ConstraintBlock, ...]
    lower: np.ndarray
    upper: np.ndarray
    var_scale: np.ndarray | None = None   # characteristic magnitudes for conditioning

    def n_constraints(self) -> int:
        return sum(b.size for b in self.blocks)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate([b.eval_fn(x)[0] for b in self.blocks])

    def constraints_and_jac(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if not self.blocks:
            return np.zeros(0), np.zeros((0, self.dim))
        vals, jacs = [], []
        for b in self.blocks:
            v, j = b.eval_fn(x)
            vals.append(np.asarray(v, float))
            jacs.append(np.asarray(j, float))
        return np.concatenate(vals), np.vstack(jacs)


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    status: str
    max_violation: float
    gap_estimate: float
    newton_steps: int
    stage_objectives: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


def check_gradients(
    problem: ConvexProblem,
    points: np.ndarray,
    *,
    rel_tol: float = 1e-5,
    h: float = 1e-7,
) -> float:
    """Max relative error between analytic and central-difference derivatives.

    `points` is (n_points, dim); every point must keep all evaluations finite.
    """
    worst = 0.0
    for x in np.atleast_2d(points):
        g = problem.gradient(x)
        _, jac = problem.constraints_and_jac(x)
        for i in range(problem.dim):
            step = h * max(1.0, abs(x[i]))
            xp, xm = x.copy(), x.copy()
            xp[i] += step
            xm[i] -= step
            fd_obj = (problem.objective(xp) - problem.objective(xm)) / (2 * step)
            scale = max(abs(g[i]), abs(fd_obj), 1e-8)
            worst = max(worst, abs(g[i] - fd_obj) / scale)
            vp = problem.constraint_values(xp)
            vm = problem.constraint_values(xm)
            fd_con = (vp - vm) / (2 * step)
            scale_c = np.maximum(np.maximum(np.abs(jac[:, i]), np.abs(fd_con)), 1e-8)
            if len(fd_con):
                worst = max(worst, float(np.max(np.abs(jac[:, i] - fd_con) / scale_c)))
    return worst


class _Scaled:
    """Problem view in scaled coordinates z = x / s."""

    def __init__(self, problem: ConvexProblem):
        self.p = problem
        s = problem.var_scale
        self.s = np.ones(problem.dim) if s is None else np.asarray(s, float)
        self.lower = problem.lower / self.s
        self.upper = problem.upper / self.s
        self.finite_lo = np.isfinite(self.lower)
        self.finite_hi = np.isfinite(self.upper)

    def x(self, z: np.ndarray) -> np.ndarray:
        return z * self.s

    def f(self, z: np.ndarray) -> float:
        return self.p.objective(z * self.s)

    def grad_f(self, z: np.ndarray) -> np.ndarray:
        return self.p.gradient(z * self.s) * self.s

    def cons(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vals, jac = self.p.constraints_and_jac(z * self.s)
        return vals, jac * self.s[None, :]

    def cons_vals(self, z: np.ndarray) -> np.ndarray:
        return self.p.constraint_values(z * self.s)


def _barrier_value(sp: _Scaled, z: np.ndarray, mu: float, f_val: float, g_vals: np.ndarray) -> float:
    if np.any(g_vals >= 0):
        return np.inf
    lo_gap = z[sp.finite_lo] - sp.lower[sp.finite_lo]
    hi_gap = sp.upper[sp.finite_hi] - z[sp.finite_hi]
    if np.any(lo_gap <= 0) or np.any(hi_gap <= 0):
        return np.inf
    phi = -np.sum(np.log(-g_vals)) - np.sum(np.log(lo_gap)) - np.sum(np.log(hi_gap))
    return f_val + mu * phi


def _barrier_grad(
    sp: _Scaled, z: np.ndarray, mu: float, grad_f: np.ndarray, g_vals: np.ndarray, jac: np.ndarray
) -> np.ndarray:
    grad = grad_f.copy()
    if len(g_vals):
        grad += mu * (jac.T @ (1.0 / (-g_vals)))
    lo_idx = np.where(sp.finite_lo)[0]
    hi_idx = np.where(sp.finite_hi)[0]
    grad[lo_idx] -= mu / (z[lo_idx] - sp.lower[lo_idx])
    grad[hi_idx] += mu / (sp.upper[hi_idx] - z[hi_idx])
    return grad


def _fd_hessian(grad_at: Callable[[np.ndarray], np.ndarray], z: np.ndarray, g0: np.ndarray) -> np.ndarray:
    n = len(z)
    h_mat = np.empty((n, n))
    for i in range(n):
        step = 1e-6 * max(1.0, abs(z[i]))
        zp = z.copy()
        zp[i] += step
        h_mat[:, i] = (grad_at(zp) - g0) / step
    return 0.5 * (h_mat + h_mat.T)


def _solve_newton(h_mat: np.ndarray, grad: np.ndarray) -> np.ndarray:
    n = len(grad)
    lam = 0.0
    base = max(np.trace(np.abs(h_mat)) / n, 1e-12)
    for _ in range(60):
        try:
            chol = np.linalg.cholesky(h_mat + lam * np.eye(n))
            d = np.linalg.solve(chol.T, np.linalg.solve(chol, -grad))
            return d
        except np.linalg.LinAlgError:
            lam = base * 1e-8 if lam == 0.0 else lam * 10.0
    return -grad  # final fallback: steepest descent


def _center(
    sp: _Scaled,
    z: np.ndarray,
    mu: float,
    config: SolverConfig,
    *,
    objective: Callable[[np.ndarray], float] | None = None,
    gradient: Callable[[np.ndarray], np.ndarray] | None = None,
    stop_below: float | None = None,
) -> tuple[np.ndarray, int]:
    """Damped Newton on the barrier function at fixed mu.

    `objective`/`gradient` default to the problem's; phase-1 overrides them.
    `stop_below` aborts once the true objective drops below it.
    """
    f_fn = objective or sp.f
    g_fn = gradient or sp.grad_f
    use_bfgs = len(z) > _BIG_BFGS_DIM

    def barrier_grad_at(zz: np.ndarray) -> np.ndarray:
        vals, jac = sp.cons(zz)
        return _barrier_grad(sp, zz, mu, g_fn(zz), vals, jac)

    steps = 0
    h_mat: np.ndarray | None = None
    g_prev: np.ndarray | None = None
    z_prev: np.ndarray | None = None
    for it in range(config.newton_max):
        f_val = f_fn(z)
        if stop_below is not None and f_val < stop_below:
            break
        vals, jac = sp.cons(z)
        grad = _barrier_grad(sp, z, mu, g_fn(z), vals, jac)
        b_val = _barrier_value(sp, z, mu, f_val, vals)
        if not np.isfinite(b_val):
            raise RuntimeError("barrier centering left the strict interior")

        if h_mat is None or not use_bfgs:
            h_mat = _fd_hessian(barrier_grad_at, z, grad)
        elif g_prev is not None:
            s_vec = z - z_prev
            y_vec = grad - g_prev
            sy = float(s_vec @ y_vec)
            if sy > 1e-12 * np.linalg.norm(s_vec) * np.linalg.norm(y_vec):
                hs = h_mat @ s_vec
                h_mat = (
                    h_mat
                    - np.outer(hs, hs) / float(s_vec @ hs)
                    + np.outer(y_vec, y_vec) / sy
                )

        d = _solve_newton(h_mat, grad)
        decrement = float(-grad @ d)
        if decrement <= 0:  # not a descent direction; regularize hard
            d = -grad
            decrement = float(grad @ grad)
        if 0.5 * decrement <= max(config.newton_tol, 1e-8 * mu * max(1, sp.p.n_constraints())):
            break

        alpha = 1.0
        accepted = False
        for _ in range(60):
            z_new = z + alpha * d
            f_new = f_fn(z_new)
            vals_new = sp.cons_vals(z_new)
            b_new = _barrier_value(sp, z_new, mu, f_new, vals_new)
            if np.isfinite(b_new) and b_new <= b_val - 1e-4 * alpha * decrement:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        z_prev, g_prev = z, grad
        z = z_new
        steps += 1
    return z, steps


def _interior_start(sp: _Scaled, z0: np.ndarray) -> np.ndarray:
    z = z0.copy()
    width = np.where(
        sp.finite_lo & sp.finite_hi, sp.upper - sp.lower, np.maximum(np.abs(z), 1.0)
    )
    pad = 1e-9 * np.maximum(width, 1e-12)
    z[sp.finite_lo] = np.maximum(z[sp.finite_lo], sp.lower[sp.finite_lo] + pad[sp.finite_lo])
    z[sp.finite_hi] = np.minimum(z[sp.finite_hi], sp.upper[sp.finite_hi] - pad[sp.finite_hi])
    return z


def _phase1(sp: _Scaled, z0: np.ndarray, config: SolverConfig) -> np.ndarray | None:
    """Minimize the maximum violation; returns a strictly feasible point or None."""
    margin = 10.0 * config.feasibility_margin

    vals0 = sp.cons_vals(z0)
    if not len(vals0):
        return z0
    s0 = float(np.max(vals0)) + 1.0

    aug = _AugmentedPhase1(sp)
    z_aug = np.concatenate([z0, [s0]])
    mu = max(abs(s0), 1.0)
    for _ in range(config.barrier_outer_max + 6):
        z_aug, _ = _center(
            aug,
            z_aug,
            mu,
            config,
            objective=lambda w: w[-1],
            gradient=lambda w: np.concatenate([np.zeros(len(w) - 1), [1.0]]),
            stop_below=-margin,
        )
        if z_aug[-1] < -margin:
            candidate = z_aug[:-1]
            if np.max(sp.cons_vals(candidate)) < 0:
                return candidate
        mu *= config.barrier_reduction
        if mu < 1e-12:
            break
    candidate = z_aug[:-1]
    if len(sp.cons_vals(candidate)) and np.max(sp.cons_vals(candidate)) < 0:
        return candidate
    return None


class _AugmentedPhase1(_Scaled):
    """Scaled view over (z, s) with constraints g_i(z) - s <= 0."""

    def __init__(self, sp: _Scaled):
        self.inner = sp
        self.p = sp.p
        self.s = np.concatenate([sp.s, [1.0]])
        self.lower = np.concatenate([sp.lower, [-np.inf]])
        self.upper = np.concatenate([sp.upper, [np.inf]])
        self.finite_lo = np.isfinite(self.lower)
        self.finite_hi = np.isfinite(self.upper)

    def cons(self, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        vals, jac = self.inner.cons(w[:-1])
        aug_jac = np.hstack([jac, -np.ones((len(vals), 1))])
        return vals - w[-1], aug_jac

    def cons_vals(self, w: np.ndarray) -> np.ndarray:
        return self.inner.cons_vals(w[:-1]) - w[-1]


def solve_convex(
    problem: ConvexProblem,
    start: np.ndarray,
    config: SolverConfig | None = None,
) -> BarrierResult:
    """Minimize the problem from `start`, which need not be strictly feasible.

    Returns the best feasible iterate seen (never worse than a feasible
    start, up to the strict-interior nudge).
    """
    config = config or SolverConfig()
    sp = _Scaled(problem)
    z = _interior_start(sp, np.asarray(start, float) / sp.s)

    vals = sp.cons_vals(z)
    if len(vals) and np.max(vals) >= 0:
        z_feas = _phase1(sp, z, config)
        if z_feas is None:
            worst = float(np.max(sp.cons_vals(z))) if len(vals) else 0.0
            return BarrierResult(
                x=sp.x(z),
                objective=sp.f(z),
                status=START_INFEASIBLE,
                max_violation=worst,
                gap_estimate=np.inf,
                newton_steps=0,
            )
        z = z_feas

    m_total = problem.n_constraints() + int(sp.finite_lo.sum()) + int(sp.finite_hi.sum())
    m_total = max(m_total, 1)
    f0 = sp.f(z)
    mu = config.barrier_mu0 if config.barrier_mu0 is not None else max(abs(f0), 1.0) / m_total

    best_z = z.copy()
    best_f = f0
    stage_objectives = [f0]
    steps_total = 0
    status = MAX_ITER
    for _ in range(config.barrier_outer_max):
        z, steps = _center(sp, z, mu, config)
        steps_total += steps
        f_here = sp.f(z)
        stage_objectives.append(f_here)
        if f_here <= best_f and (not len(vals) or np.max(sp.cons_vals(z)) < 0):
            best_f, best_z = f_here, z.copy()
        gap = m_total * mu
        if gap <= config.barrier_gap_tol * max(1.0, abs(f_here)):
            status = OPTIMAL
            break
        mu *= config.barrier_reduction
    else:
        status = MAX_ITER

    g_final = sp.cons_vals(best_z)
    return BarrierResult(
        x=sp.x(best_z),
        objective=best_f,
        status=status if status == OPTIMAL else MAX_ITER,
        max_violation=float(np.max(g_final)) if len(g_final) else 0.0,
        gap_estimate=m_total * mu,
        newton_steps=steps_total,
        stage_objectives=stage_objectives,
    )
