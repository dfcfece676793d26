"""Dense tableau simplex with Bland's rule.

Solves max c^T y s.t. A y <= b, y >= 0 for b >= 0, so the slack basis is
feasible and no phase one is needed. The reduced costs of the slack columns
at the optimum are an optimal solution of the dual
min b^T x s.t. A^T x >= c, x >= 0.
"""
import logging
from dataclasses import dataclass

import numpy as np

from app.services.errors import InputError, PreconditionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimplexResult:
    value: float
    primal: np.ndarray
    dual: np.ndarray
    pivots: int


class DenseSimplex:
    """Tableau for max c^T y, A y <= b, y >= 0."""

    def __init__(self, A, b, c, tol: float = 1e-12, max_pivots: int = 200_000):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        c = np.asarray(c, dtype=float)
        m, n = A.shape
        if b.shape != (m,) or c.shape != (n,):
            raise InputError("inconsistent LP dimensions")
        if np.any(b < 0):
            raise PreconditionError("right-hand side must be nonnegative")
        self.m, self.n = m, n
        scale = max(1.0, float(np.abs(A).max(initial=0.0)), float(np.abs(c).max(initial=0.0)))
        self.tol = tol * scale
        self.max_pivots = max_pivots

        self.T = np.zeros((m + 1, n + m + 1))
        self.T[:m, :n] = A
        self.T[:m, n:n + m] = np.eye(m)
        self.T[:m, -1] = b
        self.T[m, :n] = -c
        self.basis = list(range(n, n + m))

    def _entering(self):
        # Bland: lowest-index column with a negative reduced cost
        candidates = np.flatnonzero(self.T[self.m, :-1] < -self.tol)
        return int(candidates[0]) if candidates.size else None

    def _leaving(self, col: int):
        column = self.T[:self.m, col]
        rows = np.flatnonzero(column > self.tol)
        if rows.size == 0:
            return None
        ratios = self.T[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + self.tol * max(1.0, abs(best))]
        # Bland tie-break on the basic variable index
        return int(min(tied, key=lambda r: self.basis[r]))

    def _pivot(self, row: int, col: int):
        self.T[row] /= self.T[row, col]
        factors = self.T[:, col].copy()
        factors[row] = 0.0
        self.T -= np.outer(factors, self.T[row])
        self.basis[row] = col

    def solve(self) -> SimplexResult:
        pivots = 0
        while True:
            col = self._entering()
            if col is None:
                break
            row = self._leaving(col)
            if row is None:
                raise PreconditionError("linear program is unbounded")
            self._pivot(row, col)
            pivots += 1
            if pivots > self.max_pivots:
                raise PreconditionError(f"simplex exceeded {self.max_pivots} pivots")

        primal = np.zeros(self.n + self.m)
        for r, var in enumerate(self.basis):
            primal[var] = self.T[r, -1]
        dual = np.maximum(self.T[self.m, self.n:self.n + self.m], 0.0)
        value = float(self.T[self.m, -1])
        logger.debug(f"simplex optimum {value:.12g} after {pivots} pivots")
        return SimplexResult(value=value, primal=primal[:self.n], dual=dual, pivots=pivots)


def solve_covering_lp(A, cost) -> SimplexResult:
    """min cost^T x s.t. A x >= 1, x >= 0, solved through its packing dual.

    ``A`` has one row per covering constraint. The returned ``primal`` is
    the packing solution y and ``dual`` the covering solution x.
    """
    A = np.asarray(A, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if np.any(cost < 0):
        raise PreconditionError("covering costs must be nonnegative")
    return DenseSimplex(A.T, cost, np.ones(A.shape[0])).solve()
