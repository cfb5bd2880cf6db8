"""Self-contained dense LP feasibility via a two-phase simplex.

Solves: does there exist x with lb <= x <= ub and A x <= b?
Problem sizes here are at most a few hundred variables/rows, so a dense
tableau with Bland's rule (no cycling) is adequate.
"""

from __future__ import annotations

import numpy as np

__all__ = ["simplex_feasibility"]

_EPS = 1e-9


def simplex_feasibility(A, b, lb, ub):
    """Return (feasible: bool, x: ndarray | None)."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    n = lb.size
    if A.size == 0:
        A = A.reshape(0, n)

    # shift to z = x - lb >= 0 and fold upper bounds into rows
    b1 = b - A @ lb
    rows = [A, np.eye(n)]
    rhs = [b1, ub - lb]
    M = np.vstack(rows)
    r = np.concatenate(rhs)

    # prune rows that cannot be violated inside the box z in [0, ub-lb]
    span = ub - lb
    max_lhs = np.clip(M, 0.0, None) @ span
    keep = max_lhs > r + 1e-12
    M, r = M[keep], r[keep]
    if M.shape[0] == 0:
        return True, lb.copy()

    m = M.shape[0]
    # slack per row; artificial for rows whose rhs is negative after slack
    neg = r < 0
    M = np.where(neg[:, None], -M, M)
    r = np.where(neg, -r, r)
    slack = np.diag(np.where(neg, -1.0, 1.0))
    n_art = int(neg.sum())
    art = np.zeros((m, n_art))
    art[np.where(neg)[0], np.arange(n_art)] = 1.0

    T = np.hstack([M, slack, art, r[:, None]])
    basis = np.where(neg, n + m + np.cumsum(neg) - 1, n + np.arange(m)).astype(int)

    # phase-1 objective: minimize sum of artificials
    cost = np.zeros(T.shape[1])
    cost[n + m : n + m + n_art] = 1.0
    obj = cost.copy()
    for i in range(m):
        if basis[i] >= n + m:
            obj -= T[i]

    max_iters = 200 * (m + n)
    for _ in range(max_iters):
        entering = -1
        for j in range(T.shape[1] - 1):  # Bland: smallest eligible index
            if obj[j] < -_EPS:
                entering = j
                break
        if entering < 0:
            break
        ratios = np.full(m, np.inf)
        col = T[:, entering]
        ok = col > _EPS
        ratios[ok] = T[ok, -1] / col[ok]
        best = np.inf
        leave = -1
        for i in range(m):  # Bland on ties: smallest basis index
            if not np.isfinite(ratios[i]):
                continue
            if leave < 0 or ratios[i] < best - 1e-15 or (
                abs(ratios[i] - best) <= 1e-15 and basis[i] < basis[leave]
            ):
                best = ratios[i]
                leave = i
        if leave < 0:
            return False, None  # unbounded phase-1: cannot happen, treat as failure
        piv = T[leave, entering]
        T[leave] /= piv
        for i in range(m):
            if i != leave and T[i, entering] != 0.0:
                T[i] -= T[i, entering] * T[leave]
        obj -= obj[entering] * T[leave]
        basis[leave] = entering
    value = -obj[-1]
    if value > 1e-7:
        return False, None
    z = np.zeros(T.shape[1] - 1)
    z[basis] = T[:, -1]
    return True, z[:n] + lb
