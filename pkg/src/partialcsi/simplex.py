"""Dense two-phase tableau simplex with Bland's rule, for small LPs.

Solves ``max c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``x >= 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-10


@dataclass
class LPResult:
    status: str          # "optimal", "infeasible" or "unbounded"
    x: np.ndarray | None
    value: float | None
    iterations: int = 0


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    others = np.arange(T.shape[0]) != row
    T[others] -= np.outer(T[others, col], T[row])
    basis[row] = col


def _run(T, basis, n_cols, max_iter):
    """Maximize the objective held in the last row (stored as ``-reduced``)."""
    it = 0
    while it < max_iter:
        obj = T[-1, :n_cols]
        candidates = np.flatnonzero(obj < -TOL)
        if len(candidates) == 0:
            return "optimal", it
        col = candidates[0]  # Bland: lowest index
        column = T[:-1, col]
        positive = column > TOL
        if not np.any(positive):
            return "unbounded", it
        ratios = np.full(len(column), np.inf)
        ratios[positive] = T[:-1, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + TOL * max(1.0, abs(best)))
        row = ties[np.argmin([basis[r] for r in ties])]
        _pivot(T, basis, row, col)
        it += 1
    raise RuntimeError("simplex iteration limit reached")


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter=10_000):
    c = np.asarray(c, dtype=float)
    n = len(c)
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = len(A_ub), len(A_eq)
    m = m_ub + m_eq

    # rows scaled to unit max coefficient; slacks for inequalities
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    scale = np.maximum(np.abs(A[:, :n]).max(axis=1, initial=0.0), np.abs(b))
    scale[scale == 0] = 1.0
    A /= scale[:, None]
    b = b / scale
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    n_cols = n + m_ub

    # phase 1: one artificial per row
    T = np.zeros((m + 1, n_cols + m + 1))
    T[:m, :n_cols] = A
    T[:m, n_cols:n_cols + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n_cols] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n_cols, n_cols + m))
    _, it1 = _run(T, basis, n_cols + m, max_iter)
    if -T[-1, -1] > 1e-8:
        return LPResult("infeasible", None, None, it1)

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for r in range(m):
        if basis[r] >= n_cols:
            nz = np.flatnonzero(np.abs(T[r, :n_cols]) > TOL)
            if len(nz) == 0:
                continue
            _pivot(T, basis, r, nz[0])
        keep.append(r)
    T = np.vstack([T[keep][:, list(range(n_cols)) + [T.shape[1] - 1]], np.zeros(n_cols + 1)])
    basis = [basis[r] for r in keep]

    # phase 2
    c_scale = max(np.abs(c).max(initial=0.0), 1e-300)
    cost = np.zeros(n_cols)
    cost[:n] = c / c_scale
    T[-1, :n_cols] = -cost
    for r, j in enumerate(basis):
        T[-1] += cost[j] * T[r]
    status, it2 = _run(T, basis, n_cols, max_iter)
    if status != "optimal":
        return LPResult(status, None, None, it1 + it2)
    x = np.zeros(n_cols)
    for r, j in enumerate(basis):
        x[j] = T[r, -1]
    x = np.maximum(x[:n], 0.0)
    return LPResult("optimal", x, float(c @ x), it1 + it2)
