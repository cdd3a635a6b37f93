"""Deterministic rectangular linear assignment.

``linear_assignment`` returns the optimal full-cardinality matching of a dense
cost (or score) matrix. Among assignments whose totals tie within ``tol`` it
returns the lexicographically smallest list of ``(row, col)`` pairs, which
makes results independent of solver internals.

Ties are resolved by fixing rows in order. Dual potentials from the solver
prune every non-tight pair, so a candidate is only re-solved when it is tight
and differs from the current optimal witness; on generic inputs no extra
solves happen.
"""

from __future__ import annotations

import numpy as np

from . import kernels

TIE_TOL = 1e-9


def _solve(cost):
    """Optimal value and column-for-row of ``cost`` (any shape), via the kernel.

    Returns ``(value, assignment)`` with ``assignment[i]`` the column of row
    ``i`` or ``-1``.
    """
    n, m = cost.shape
    if n == 0 or m == 0:
        return 0.0, np.full(n, -1, dtype=np.int64)
    if n <= m:
        col4row, _, _ = kernels.lsa_min(cost)
        return float(cost[np.arange(n), col4row].sum()), col4row
    row4col, _, _ = kernels.lsa_min(np.ascontiguousarray(cost.T))
    assign = np.full(n, -1, dtype=np.int64)
    assign[row4col] = np.arange(m)
    return float(cost[row4col, np.arange(m)].sum()), assign


def linear_assignment(matrix, maximize: bool = False, tol: float = TIE_TOL):
    """Solve the assignment problem on ``matrix``.

    Parameters
    ----------
    matrix : array_like, shape (n, m)
        Costs (or scores when ``maximize``).
    maximize : bool
        Maximize the total instead of minimizing it.
    tol : float
        Absolute tolerance under which two totals count as tied.

    Returns
    -------
    list of (int, int)
        ``min(n, m)`` pairs sorted by row.
    """
    score = np.asarray(matrix, dtype=np.float64)
    if score.ndim != 2:
        raise ValueError("assignment matrix must be 2-D")
    n, m = score.shape
    if n == 0 or m == 0:
        return []
    cost = -score if maximize else score.copy()
    if not np.all(np.isfinite(cost)):
        raise ValueError("assignment matrix must be finite")

    if n <= m:
        col4row, u, v = kernels.lsa_min(cost)
        reduced = cost - u[:, None] - v[None, :]
        witness = np.asarray(col4row, dtype=np.int64).copy()
    else:
        row4col, u, v = kernels.lsa_min(np.ascontiguousarray(cost.T))
        reduced = (cost.T - u[:, None] - v[None, :]).T
        witness = np.full(n, -1, dtype=np.int64)
        witness[row4col] = np.arange(m)
    best = float(sum(cost[i, j] for i, j in enumerate(witness) if j >= 0))
    tight = reduced <= tol
    target = min(n, m)

    fixed_cost = 0.0
    n_assigned = 0
    used_cols = np.zeros(m, dtype=bool)
    result = []
    for r in range(n):
        cand = set(int(c) for c in np.flatnonzero(tight[r] & ~used_cols))
        if witness[r] >= 0:
            cand.add(int(witness[r]))
        options = sorted(cand)
        if n > m:
            options.append(-1)
        for opt in options:
            if opt == int(witness[r]):
                break
            # does fixing row r to `opt` still reach the optimum?
            new_assigned = n_assigned + (opt >= 0)
            rest_rows = np.arange(r + 1, n)
            cols_mask = used_cols.copy()
            if opt >= 0:
                cols_mask[opt] = True
            rest_cols = np.flatnonzero(~cols_mask)
            need = target - new_assigned
            if min(rest_rows.size, rest_cols.size) < need:
                continue
            sub = cost[np.ix_(rest_rows, rest_cols)]
            sub_value, sub_assign = _solve(sub)
            total = fixed_cost + (cost[r, opt] if opt >= 0 else 0.0) + sub_value
            if total <= best + tol:
                witness = witness.copy()
                witness[r] = opt
                if rest_cols.size:
                    witness[r + 1:] = np.where(
                        sub_assign >= 0, rest_cols[np.maximum(sub_assign, 0)], -1
                    )
                else:
                    witness[r + 1:] = -1
                break
        choice = int(witness[r])
        if choice >= 0:
            used_cols[choice] = True
            fixed_cost += cost[r, choice]
            n_assigned += 1
            result.append((r, choice))
    return result
