"""Dense two-phase simplex with Bland's anti-cycling rule.

Solves  min c@x  s.t.  a_ub @ x <= b_ub,  lower <= x <= upper.

Small LPs only (tens of variables): the tableau is dense and finite upper
bounds are folded in as extra rows.  Optimal solutions carry the KKT
multipliers of the a_ub rows so callers can certify optimality through the
complementary-slackness residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    lower: np.ndarray | None = None   # default zeros
    upper: np.ndarray | None = None   # default +inf

    def dims(self) -> tuple[int, int]:
        n = len(self.c)
        m = 0 if self.a_ub is None else np.asarray(self.a_ub).shape[0]
        return m, n


@dataclass(frozen=True)
class LPSolution:
    status: str
    x: np.ndarray | None
    objective: float | None
    duals_ub: np.ndarray | None          # multipliers of the a_ub rows (>= 0)
    slack_ub: np.ndarray | None
    cs_residual: float | None            # complementary-slackness residual, normalized
    pivots: int


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and tab[r, col] != 0.0:
            tab[r] -= tab[r, col] * tab[row]
    basis[row] = col


def _bland_iterate(
    tab: np.ndarray,
    basis: np.ndarray,
    cost: np.ndarray,
    tol: float,
    max_pivots: int,
) -> tuple[str, int]:
    """Simplex iterations on `tab` (last column = rhs) for the given cost row."""
    pivots = 0
    m, ncols = tab.shape[0], tab.shape[1] - 1
    while True:
        cb = cost[basis]
        reduced = cost[:ncols] - cb @ tab[:, :ncols]
        entering = -1
        for j in range(ncols):
            if reduced[j] < -tol:
                entering = j       # Bland: smallest index
                break
        if entering < 0:
            return OPTIMAL, pivots
        col = tab[:, entering]
        best_ratio, leave = np.inf, -1
        for r in range(m):
            if col[r] > tol:
                ratio = max(tab[r, -1], 0.0) / col[r]
                if ratio < best_ratio - 1e-15 or (
                    abs(ratio - best_ratio) <= 1e-15
                    and (leave < 0 or basis[r] < basis[leave])
                ):
                    best_ratio, leave = ratio, r
        if leave < 0:
            return UNBOUNDED, pivots
        _pivot(tab, basis, leave, entering)
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex exceeded the pivot cap")


def solve_lp(
    lp: LinearProgram,
    *,
    tol: float = 1e-9,
    max_pivots: int = 20000,
) -> LPSolution:
    c = np.asarray(lp.c, dtype=float)
    n = len(c)
    lower = np.zeros(n) if lp.lower is None else np.asarray(lp.lower, dtype=float)
    upper = np.full(n, np.inf) if lp.upper is None else np.asarray(lp.upper, dtype=float)
    if np.any(~np.isfinite(lower)):
        raise ValueError("finite lower bounds required")
    if np.any(upper < lower - 1e-15):
        return LPSolution(INFEASIBLE, None, None, None, None, None, 0)

    # shift to y = x - lower >= 0; fold finite uppers in as rows
    a_blocks, b_blocks = [], []
    n_ub = 0
    if lp.a_ub is not None and len(lp.a_ub):
        a_ub = np.atleast_2d(np.asarray(lp.a_ub, dtype=float))
        b_ub = np.asarray(lp.b_ub, dtype=float)
        n_ub = a_ub.shape[0]
        a_blocks.append(a_ub)
        b_blocks.append(b_ub - a_ub @ lower)
    finite_up = np.where(np.isfinite(upper))[0]
    if len(finite_up):
        rows = np.zeros((len(finite_up), n))
        rows[np.arange(len(finite_up)), finite_up] = 1.0
        a_blocks.append(rows)
        b_blocks.append(upper[finite_up] - lower[finite_up])
    if a_blocks:
        a = np.vstack(a_blocks)
        b = np.concatenate(b_blocks)
    else:
        a, b = np.zeros((0, n)), np.zeros(0)
    n_slack = a.shape[0]

    tab = np.hstack([a, np.eye(n_slack), b[:, None]])
    cost = np.concatenate([c, np.zeros(n_slack)])
    basis = np.arange(n, n + n_slack)

    neg = tab[:, -1] < 0
    tab[neg] *= -1.0
    pivots = 0
    if np.any(neg):
        art_rows = np.where(neg)[0]
        n_art = len(art_rows)
        art_cols = np.zeros((n_slack, n_art))
        art_cols[art_rows, np.arange(n_art)] = 1.0
        tab = np.hstack([tab[:, :-1], art_cols, tab[:, -1:]])
        art_start = n + n_slack
        basis[art_rows] = art_start + np.arange(n_art)
        phase1_cost = np.zeros(n + n_slack + n_art)
        phase1_cost[art_start:] = 1.0
        status, piv = _bland_iterate(tab, basis, phase1_cost, tol, max_pivots)
        pivots += piv
        infeasibility = float(phase1_cost[basis] @ tab[:, -1])
        if infeasibility > tol * max(1.0, float(abs(b).max()) if n_slack else 1.0):
            return LPSolution(INFEASIBLE, None, None, None, None, None, pivots)
        for r in range(tab.shape[0]):
            if basis[r] >= art_start:
                cols = np.where(np.abs(tab[r, : n + n_slack]) > tol)[0]
                if len(cols):
                    _pivot(tab, basis, r, cols[0])
                    pivots += 1
        keep = [r for r in range(tab.shape[0]) if basis[r] < art_start]
        tab = np.hstack([tab[keep][:, : n + n_slack], tab[keep][:, -1:]])
        basis = basis[keep]

    status, piv = _bland_iterate(tab, basis, cost, tol, max_pivots)
    pivots += piv
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, None, None, None, None, None, pivots)

    y = np.zeros(n + n_slack)
    y[basis] = np.maximum(tab[:, -1], 0.0)
    x = y[:n] + lower
    objective = float(c @ x)

    cb = cost[basis]
    reduced = cost - cb @ tab[:, :-1]
    lambdas = np.maximum(reduced[n : n + n_slack], 0.0)  # KKT multipliers, >= 0
    duals_ub = lambdas[:n_ub].copy()
    if n_ub:
        slack_ub = np.asarray(lp.b_ub, float) - np.atleast_2d(
            np.asarray(lp.a_ub, float)
        ) @ x
    else:
        slack_ub = np.zeros(0)
    # complementary slackness over rows (lambda_i * slack_i) and shifted columns
    slack_all = tab[:, -1] * 0.0  # placeholder; recompute from shifted system
    slack_all = b - a @ y[:n] if n_slack else np.zeros(0)
    cs = float(abs(lambdas @ slack_all)) + float(abs(np.maximum(reduced[:n], 0.0) @ y[:n]))
    scale = max(1.0, abs(objective))
    return LPSolution(OPTIMAL, x, objective, duals_ub, slack_ub, cs / scale, pivots)
