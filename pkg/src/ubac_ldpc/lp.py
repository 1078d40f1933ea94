"""Dense two-phase simplex for the small linear programs of the optimizer.

Problems are taken in the form

    minimize  c @ x
    s.t.      A_ub @ x <= b_ub,  A_eq @ x == b_eq,  lo <= x <= hi

with finite lower bounds.  Bounds are handled by shifting ``x = lo + x'`` and
adding one row per finite upper bound.  Pivoting uses Dantzig's rule and falls
back to Bland's rule after a run of degenerate pivots, which rules out cycling.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

TOL = 1e-9


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: LPStatus
    x: np.ndarray | None
    fun: float | None
    pivots: int

    @property
    def ok(self) -> bool:
        return self.status is LPStatus.OPTIMAL


class _Tableau:
    """Row-reduced tableau ``T = [A | b]`` with cost row kept separately."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: np.ndarray, tol: float):
        self.T = np.hstack([A, b[:, None]]).astype(np.float64)
        self.basis = basis.copy()
        self.tol = tol
        self.pivots = 0

    def pivot(self, r: int, j: int) -> None:
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        self.basis[r] = j
        self.pivots += 1

    def reduced_costs(self, c: np.ndarray) -> np.ndarray:
        return c - c[self.basis] @ self.T[:, :-1]

    def run(self, c: np.ndarray, allowed: np.ndarray, max_pivots: int) -> LPStatus:
        tol = self.tol
        degenerate_run = 0
        while True:
            if self.pivots >= max_pivots:
                return LPStatus.ITERATION_LIMIT
            d = self.reduced_costs(c)
            d[~allowed] = 0.0
            d[self.basis] = 0.0
            candidates = np.flatnonzero(d < -tol)
            if candidates.size == 0:
                return LPStatus.OPTIMAL
            bland = degenerate_run > 50
            j = int(candidates[0]) if bland else int(candidates[np.argmin(d[candidates])])
            colj = self.T[:, j]
            rows = np.flatnonzero(colj > tol)
            if rows.size == 0:
                return LPStatus.UNBOUNDED
            ratios = self.T[rows, -1] / colj[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            r = int(ties[np.argmin(self.basis[ties])]) if bland else int(ties[np.argmax(colj[ties])])
            degenerate_run = degenerate_run + 1 if best <= tol else 0
            self.pivot(r, j)


def linprog(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    bounds=None,
    *,
    tol: float = TOL,
    max_pivots: int = 50_000,
) -> LPResult:
    """Solve a small dense LP.  ``bounds`` is a list of ``(lo, hi)``; ``hi`` may be None.

    Missing bounds default to ``(0, None)``.  Lower bounds must be finite.
    """
    c = np.asarray(c, dtype=np.float64)
    nv = c.size
    A_ub = np.zeros((0, nv)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=np.float64))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).ravel()
    A_eq = np.zeros((0, nv)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=np.float64))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).ravel()
    if A_ub.shape != (b_ub.size, nv) or A_eq.shape != (b_eq.size, nv):
        raise ValueError("constraint shapes do not match the cost vector")
    if bounds is None:
        bounds = [(0.0, None)] * nv
    if len(bounds) != nv:
        raise ValueError("one (lo, hi) pair per variable is required")
    lo = np.array([b[0] for b in bounds], dtype=np.float64)
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=np.float64)
    if not np.all(np.isfinite(lo)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi < lo - tol):
        return LPResult(LPStatus.INFEASIBLE, None, None, 0)

    # shift to x' >= 0 and append finite upper bounds as <= rows
    b_ub = b_ub - A_ub @ lo
    b_eq = b_eq - A_eq @ lo
    ub_idx = np.flatnonzero(np.isfinite(hi))
    if ub_idx.size:
        extra = np.zeros((ub_idx.size, nv))
        extra[np.arange(ub_idx.size), ub_idx] = 1.0
        A_ub = np.vstack([A_ub, extra])
        b_ub = np.concatenate([b_ub, hi[ub_idx] - lo[ub_idx]])

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    if m == 0:
        if np.any(c < -tol):
            return LPResult(LPStatus.UNBOUNDED, None, None, 0)
        return LPResult(LPStatus.OPTIMAL, lo.copy(), float(c @ lo), 0)

    # columns: x' (nv) | slacks (m_ub) | artificials (m)
    A = np.zeros((m, nv + m_ub))
    A[:m_ub, :nv] = A_ub
    A[:m_ub, nv:] = np.eye(m_ub)
    A[m_ub:, :nv] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b = np.where(neg, -b, b)

    ncore = nv + m_ub
    # slacks of rows with b >= 0 start basic; other rows need an artificial
    basis = np.empty(m, dtype=np.int64)
    art_rows = []
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis[i] = nv + i
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    A_full = np.hstack([A, np.zeros((m, n_art))])
    for k, i in enumerate(art_rows):
        A_full[i, ncore + k] = 1.0
        basis[i] = ncore + k
    tab = _Tableau(A_full, b, basis, tol)
    ntot = ncore + n_art

    if n_art:
        c1 = np.zeros(ntot)
        c1[ncore:] = 1.0
        status = tab.run(c1, np.ones(ntot, dtype=bool), max_pivots)
        if status is LPStatus.ITERATION_LIMIT:
            return LPResult(status, None, None, tab.pivots)
        infeas = float(tab.T[tab.basis >= ncore, -1].sum())
        if infeas > tol * max(1.0, float(np.abs(b).max())) * 10:
            return LPResult(LPStatus.INFEASIBLE, None, None, tab.pivots)
        # drive remaining artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in np.flatnonzero(tab.basis >= ncore):
            row = tab.T[r, :ncore]
            nz = np.flatnonzero(np.abs(row) > tol)
            nz = nz[~np.isin(nz, tab.basis)]
            if nz.size:
                tab.pivot(int(r), int(nz[np.argmax(np.abs(row[nz]))]))
            else:
                keep[r] = False
        tab.T = tab.T[keep]
        tab.basis = tab.basis[keep]

    c2 = np.zeros(ntot)
    c2[:nv] = c
    allowed = np.zeros(ntot, dtype=bool)
    allowed[:ncore] = True
    status = tab.run(c2, allowed, max_pivots)
    if status is not LPStatus.OPTIMAL:
        return LPResult(status, None, None, tab.pivots)
    z = np.zeros(ntot)
    z[tab.basis] = tab.T[:, -1]
    x = lo + np.maximum(z[:nv], 0.0)
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x), tab.pivots)
