"""A small dense simplex solver (Bland's rule) for exact-style LP decisions.

Only meant for tiny instances (a handful of equality rows, tens of columns),
where determinism and exactness of the decision matter more than speed.
Problems are given in standard form:

    minimize c.x  subject to  A x = b, x >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PIVOT_TOL = 1e-11


@dataclass
class LpResult:
    status: str          # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None


def _simplex_phase(tableau: np.ndarray, basis: list[int], ncols: int) -> str:
    """Run simplex pivots on a tableau whose last row is the reduced costs.

    Bland's rule (lowest eligible index) guarantees termination.  The last
    column is the rhs.  Returns "optimal" or "unbounded".
    """
    nrows = tableau.shape[0] - 1
    while True:
        costs = tableau[-1, :ncols]
        enter = -1
        for j in range(ncols):
            if costs[j] < -_PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal"
        ratios_best = np.inf
        leave = -1
        for i in range(nrows):
            a = tableau[i, enter]
            if a > _PIVOT_TOL:
                r = tableau[i, -1] / a
                if r < ratios_best - _PIVOT_TOL or (
                    abs(r - ratios_best) <= _PIVOT_TOL and (leave < 0 or basis[i] < basis[leave])
                ):
                    ratios_best = r
                    leave = i
        if leave < 0:
            return "unbounded"
        piv = tableau[leave, enter]
        tableau[leave] /= piv
        for i in range(tableau.shape[0]):
            if i != leave and tableau[i, enter] != 0.0:
                tableau[i] -= tableau[i, enter] * tableau[leave]
        basis[leave] = enter


def solve_lp(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> LpResult:
    """Two-phase simplex for min c.x s.t. A x = b, x >= 0."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).copy()
    c = np.asarray(c, dtype=np.float64)
    m, n = a.shape
    a = a.copy()
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1: artificials
    t = np.zeros((m + 1, n + m + 1))
    t[:m, :n] = a
    t[:m, n:n + m] = np.eye(m)
    t[:m, -1] = b
    t[-1, n:n + m] = 1.0
    basis = list(range(n, n + m))
    for i in range(m):
        t[-1] -= t[i]
    status = _simplex_phase(t, basis, n + m)
    if status != "optimal" or t[-1, -1] < -1e-8:
        return LpResult("infeasible", None, None)

    # drive lingering artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            for j in range(n):
                if abs(t[i, j]) > _PIVOT_TOL:
                    piv = t[i, j]
                    t[i] /= piv
                    for k in range(m + 1):
                        if k != i and t[k, j] != 0.0:
                            t[k] -= t[k, j] * t[i]
                    basis[i] = j
                    break

    # phase 2
    t2 = np.zeros((m + 1, n + 1))
    t2[:m, :n] = t[:m, :n]
    t2[:m, -1] = t[:m, -1]
    t2[-1, :n] = c
    for i in range(m):
        if basis[i] < n:
            t2[-1] -= c[basis[i]] * t2[i]
    status = _simplex_phase(t2, basis, n)
    if status == "unbounded":
        return LpResult("unbounded", None, None)
    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = t2[i, -1]
    return LpResult("optimal", x, float(c @ x))
