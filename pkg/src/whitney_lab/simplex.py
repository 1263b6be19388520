"""Dense simplex solver for the small fitting LPs (minimax and weighted L1).

Problem sizes here are tiny (at most a few tens of thousands of tableau
entries), so a dense tableau with vectorized pivots is both simple and fast.
Pricing is Dantzig's rule by default; after a run of degenerate pivots the
solver switches to Bland's rule, which guarantees no cycling.  Both fitting
front ends construct a basic feasible starting point directly (slack basis
plus one driving pivot for the minimax bound variable), so no artificial
phase is needed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["SimplexError", "simplex_solve", "solve_minimax", "solve_weighted_l1"]

PIVOT_TOL = 1e-9
STALL_LIMIT = 40  # consecutive degenerate pivots before switching to Bland


class SimplexError(RuntimeError):
    """Solver failure; carries the best feasible incumbent found so far."""

    def __init__(self, message: str, incumbent: np.ndarray | None = None,
                 objective: float | None = None):
        super().__init__(message)
        self.incumbent = incumbent
        self.objective = objective


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])


def simplex_solve(A: np.ndarray, b: np.ndarray, c: np.ndarray,
                  basis: list[int], max_iter: int | None = None) -> tuple[np.ndarray, float]:
    """Minimize ``c @ x`` subject to ``A x = b``, ``x >= 0``.

    ``basis`` must index a basic feasible solution (b >= 0 after the caller's
    setup).  Returns the optimal ``x`` and objective.  Raises
    :class:`SimplexError` with the incumbent attached when the iteration cap
    (50 * (#variables + #constraints) by default) is reached.
    """
    m, n = A.shape
    if max_iter is None:
        max_iter = 50 * (n + m)
    tableau = np.hstack([A.astype(float), b.astype(float).reshape(-1, 1)])
    basis = list(basis)
    for i, j in enumerate(basis):
        if abs(tableau[i, j] - 1.0) > PIVOT_TOL or np.any(
                np.abs(np.delete(tableau[:, j], i)) > PIVOT_TOL):
            _pivot(tableau, i, j)
    if np.any(tableau[:, -1] < -1e-7):
        raise SimplexError("initial basis is not feasible")
    np.clip(tableau[:, -1], 0.0, None, out=tableau[:, -1])

    cost = np.append(c.astype(float), 0.0)
    cost_row = cost - cost[basis] @ tableau
    # optimality at the problem's own scale: once reduced costs are down at
    # round-off level, chasing them pivots on noise and corrupts the tableau
    opt_tol = PIVOT_TOL * (1.0 + np.abs(c).max() + np.abs(b).max())

    def current_x():
        x = np.zeros(n)
        x[basis] = tableau[:, -1]
        return x

    bland = False
    stall = 0
    for _ in range(max_iter):
        reduced = cost_row[:n]
        if bland:
            negs = np.nonzero(reduced < -opt_tol)[0]
            if negs.size == 0:
                break
            col = int(negs[0])
        else:
            col = int(np.argmin(reduced))
            if reduced[col] >= -opt_tol:
                break
        column = tableau[:, col]
        positive = column > PIVOT_TOL * (1.0 + np.abs(column).max())
        if not np.any(positive):
            raise SimplexError("LP is unbounded", current_x(),
                               float(cost[basis] @ tableau[:, -1]))
        ratios = np.full(m, np.inf)
        ratios[positive] = tableau[positive, -1] / column[positive]
        best = ratios.min()
        candidates = np.nonzero(ratios <= best + PIVOT_TOL * (1.0 + best))[0]
        if candidates.size == 0 or not np.isfinite(best):
            raise SimplexError("numerical breakdown in the ratio test",
                               current_x(), float(cost[basis] @ tableau[:, -1]))
        if bland:
            # Bland's anti-cycling rule: lowest-label variable leaves; skip
            # rows whose pivot entry is pure noise when a solid one is tied
            strong = candidates[np.abs(column[candidates])
                                >= 1e-8 * (1.0 + np.abs(column).max())]
            pool = strong if strong.size else candidates
            row = int(min(pool, key=lambda i: basis[i]))
        else:
            # stability: among tied ratios pivot on the largest column entry
            row = int(candidates[int(np.argmax(column[candidates]))])
        if best <= PIVOT_TOL:
            stall += 1
            if stall > max(STALL_LIMIT, 2 * m):
                bland = True
        else:
            stall = 0
            bland = False
        _pivot(tableau, row, col)
        cost_row -= cost_row[col] * tableau[row]
        basis[row] = col
    else:
        x = current_x()
        raise SimplexError("iteration cap reached", x, float(cost[:n] @ x))
    x = current_x()
    return x, float(cost[:n] @ x)


def solve_minimax(design: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, float]:
    """Coefficients minimizing ``max_j |targets_j - design_j @ coef|``.

    Formulated as min u subject to -u <= targets - design @ coef <= u and
    solved by the dense simplex.  The free coefficients are split into
    positive parts; the bound variable u enters the basis through one driving
    pivot on the most violated row, which makes the slack start feasible.
    """
    m, k = design.shape
    n = 2 * k + 1 + 2 * m
    u_col = 2 * k
    A = np.zeros((2 * m, n))
    A[:m, :k] = design
    A[:m, k:2 * k] = -design
    A[m:, :k] = -design
    A[m:, k:2 * k] = design
    A[:, u_col] = -1.0
    A[:, u_col + 1:] = np.eye(2 * m)
    b = np.concatenate([targets, -targets]).astype(float)
    basis = list(range(u_col + 1, n))
    worst = int(np.argmin(b))
    if b[worst] < 0.0:
        tableau_fix = np.hstack([A, b.reshape(-1, 1)])
        _pivot(tableau_fix, worst, u_col)
        A, b = tableau_fix[:, :-1], tableau_fix[:, -1]
        basis[worst] = u_col
    cost = np.zeros(n)
    cost[u_col] = 1.0
    x, value = simplex_solve(A, b, cost, basis)
    coef = x[:k] - x[k:2 * k]
    return coef, float(value)


def solve_weighted_l1(design: np.ndarray, targets: np.ndarray,
                      weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Coefficients minimizing ``sum_j weights_j |targets_j - design_j @ coef|``.

    Residuals are split as ``targets - design @ coef = s+ - s-`` with
    ``s+, s- >= 0``; picking the sign-matching split variable per row yields
    an immediately feasible basis.
    """
    m, k = design.shape
    n = 2 * k + 2 * m
    A = np.zeros((m, n))
    A[:, :k] = design
    A[:, k:2 * k] = -design
    A[:, 2 * k:2 * k + m] = np.eye(m)
    A[:, 2 * k + m:] = -np.eye(m)
    b = targets.astype(float).copy()
    basis = []
    for j in range(m):
        if b[j] >= 0.0:
            basis.append(2 * k + j)
        else:
            A[j] *= -1.0
            b[j] *= -1.0
            basis.append(2 * k + m + j)
    cost = np.zeros(n)
    cost[2 * k:2 * k + m] = weights
    cost[2 * k + m:] = weights
    x, value = simplex_solve(A, b, cost, basis)
    coef = x[:k] - x[k:2 * k]
    return coef, float(value)
