"""Dense two-phase tableau simplex.

Solves ``max c.x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0``.

Pricing takes the most negative reduced cost (lowest index on ties). After a
run of degenerate pivots it switches to Bland's rule (lowest-index entering
column, lowest-index leaving basic variable), which cannot cycle, and goes
back once the objective moves. Every choice is index-ordered, so the pivot
sequence is fully deterministic.

In float mode the tableau is rebuilt from the original matrix and the current
basis every few dozen pivots, so roundoff cannot accumulate over long runs.
``exact=True`` runs the same pivots over `fractions.Fraction` with zero
tolerance; it is meant for tiny certification instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InfeasibleLP, UnboundedLP

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
REFACTOR_EVERY = 50
DEGENERATE_RUN = 20


@dataclass
class LPInstance:
    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    names: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        if self.A_ub is None:
            self.A_ub, self.b_ub = np.zeros((0, n)), np.zeros(0)
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, n)), np.zeros(0)
        self.A_ub = np.asarray(self.A_ub, dtype=float).reshape(-1, n)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        if self.A_ub.shape[0] != self.b_ub.size or self.A_eq.shape[0] != self.b_eq.size:
            raise ValueError("constraint matrix and right-hand side sizes disagree")

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class LPSolution:
    x: np.ndarray
    objective: float
    iterations: int


class _Tableau:
    """Row 0 holds reduced costs and the objective; rows 1.. hold B^-1 [A | b]."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int], exact: bool):
        self.A, self.b, self.basis, self.exact = A, b, basis, exact
        self.tol = 0 if exact else PIVOT_TOL
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1), dtype=object if exact else float)
        if exact:
            self.T[:] = Fraction(0)
        # the starting basis columns are unit vectors, so B^-1 = I
        self.T[1:, :n] = A
        self.T[1:, -1] = b
        self.cost = None
        self.pivots = 0

    def set_cost(self, cost: np.ndarray) -> None:
        self.cost = cost
        T = self.T
        T[0, :-1] = -cost
        T[0, -1] = T[0, -1] * 0
        for i, j in enumerate(self.basis):
            if cost[j] != 0:
                T[0] = T[0] + cost[j] * T[i + 1]

    def refactor(self) -> None:
        if self.exact or not self.basis:
            return
        B = self.A[:, self.basis]
        body = np.linalg.solve(B, np.hstack([self.A, self.b[:, None]]))
        rhs = body[:, -1]
        rhs[(rhs < 0) & (rhs > -FEAS_TOL)] = 0.0
        self.T[1:] = body
        cb = self.cost[self.basis]
        self.T[0, :-1] = cb @ body[:, :-1] - self.cost
        self.T[0, -1] = cb @ rhs
        for i, j in enumerate(self.basis):
            self.T[:, j] = 0.0
            self.T[i + 1, j] = 1.0

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] = T[row] / T[row, col]
        colvals = T[:, col].copy()
        colvals[row] = 0
        T -= np.outer(colvals, T[row])
        if not self.exact:
            T[:, col] = 0.0
            T[row, col] = 1.0
        self.basis[row - 1] = col
        self.pivots += 1
        if not self.exact and self.pivots % REFACTOR_EVERY == 0:
            self.refactor()

    def run(self, n_cols: int, max_iter: int) -> None:
        T, tol = self.T, self.tol
        start = self.pivots
        stalled = 0
        while True:
            reduced = T[0, :n_cols]
            improving = np.flatnonzero(np.asarray(reduced < -tol, dtype=bool))
            if improving.size == 0:
                self.refactor()
                if self.exact or not np.any(T[0, :n_cols] < -tol):
                    return
                continue
            if stalled >= DEGENERATE_RUN:
                entering = int(improving[0])
            else:
                entering = int(improving[np.argmin(np.asarray(reduced[improving], dtype=float))])
            colvals = T[1:, entering]
            rows = np.flatnonzero(np.asarray(colvals > tol, dtype=bool))
            if rows.size == 0:
                raise UnboundedLP(f"objective unbounded along column {entering}")
            ratios = T[1:, -1][rows] / colvals[rows]
            best = min(ratios)
            slack = 0 if self.exact else tol * max(1.0, abs(float(best)))
            ties = rows[np.asarray(ratios <= best + slack, dtype=bool)]
            basis_arr = np.asarray(self.basis)
            leave = int(ties[np.argmin(basis_arr[ties])])
            before = T[0, -1]
            self.pivot(leave + 1, entering)
            stalled = stalled + 1 if T[0, -1] <= before + slack else 0
            if self.pivots - start > max_iter:
                raise RuntimeError(f"simplex exceeded {max_iter} iterations")

    def drop_rows_and_columns(self, keep_rows: list[int], n_cols: int) -> None:
        self.A = self.A[keep_rows, :n_cols]
        self.b = self.b[keep_rows]
        self.basis = [self.basis[i] for i in keep_rows]
        self.T = np.concatenate([self.T[:1], self.T[[i + 1 for i in keep_rows]]], axis=0)
        self.T = np.concatenate([self.T[:, :n_cols], self.T[:, -1:]], axis=1)


def lp_solve(inst: LPInstance, exact: bool = False, max_iter: int = 200_000) -> LPSolution:
    n = inst.n_vars
    m_ub, m_eq = inst.A_ub.shape[0], inst.A_eq.shape[0]
    m = m_ub + m_eq
    conv = (lambda a: np.vectorize(Fraction, otypes=[object])(a)) if exact else (lambda a: a.astype(float))
    dtype = object if exact else float

    A = np.zeros((m, n + m_ub), dtype=dtype)
    b = np.zeros(m, dtype=dtype)
    if m_ub:
        A[:m_ub, :n] = conv(inst.A_ub)
        A[:m_ub, n:] = conv(np.eye(m_ub))
        b[:m_ub] = conv(inst.b_ub)
    if m_eq:
        A[m_ub:, :n] = conv(inst.A_eq)
        b[m_ub:] = conv(inst.b_eq)
    if exact:
        A[A == 0] = Fraction(0)
        b[b == 0] = Fraction(0)
    neg = np.array([bi < 0 for bi in b], dtype=bool)
    A[neg] *= -1
    b[neg] *= -1

    # slack columns serve as the starting basis where they can; artificials elsewhere
    n_struct = n + m_ub
    art_rows = [i for i in range(m) if i >= m_ub or neg[i]]
    n_art = len(art_rows)
    A_full = np.zeros((m, n_struct + n_art), dtype=dtype)
    if exact:
        A_full[:] = Fraction(0)
    A_full[:, :n_struct] = A
    basis = [n + i for i in range(m)]
    for a_idx, i in enumerate(art_rows):
        A_full[i, n_struct + a_idx] = 1
        basis[i] = n_struct + a_idx

    tab = _Tableau(A_full, b, basis, exact)
    zero = Fraction(0) if exact else 0.0
    if n_art:
        cost = np.array([zero] * (n_struct + n_art), dtype=dtype)
        cost[n_struct:] = -1
        tab.set_cost(cost)
        tab.run(n_struct + n_art, max_iter)
        if tab.T[0, -1] < -(0 if exact else FEAS_TOL * max(1.0, float(np.abs(b).max()))):
            raise InfeasibleLP(f"phase 1 optimum {float(tab.T[0, -1]):.3e} < 0")
        keep = []
        for i in range(len(tab.basis)):
            if tab.basis[i] >= n_struct:
                row = tab.T[i + 1, :n_struct]
                cand = np.flatnonzero(np.asarray(np.abs(row) > (0 if exact else 1e-9), dtype=bool))
                if cand.size:
                    tab.pivot(i + 1, int(cand[0]))
                    keep.append(i)
                # otherwise the row is redundant
            else:
                keep.append(i)
        tab.drop_rows_and_columns(keep, n_struct)

    obj = conv(np.concatenate([inst.c, np.zeros(m_ub)]))
    tab.set_cost(obj)
    tab.refactor()
    tab.run(n_struct, max_iter)

    x = np.zeros(n_struct, dtype=dtype)
    if exact:
        x[:] = Fraction(0)
    for i, j in enumerate(tab.basis):
        x[j] = tab.T[i + 1, -1]
    x = x[:n]
    objective = tab.T[0, -1]
    if not exact:
        objective = float(objective)
        x = np.where(np.abs(x) < FEAS_TOL * 1e-3, 0.0, x)
    return LPSolution(x, objective, tab.pivots)
