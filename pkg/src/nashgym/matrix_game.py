"""Zero-sum matrix games solved with a dense tableau simplex.

The row player maximizes ``x @ M @ y``. After shifting the payoffs to be
strictly positive, the column player's problem becomes

    maximize sum(w)  subject to  M' w <= 1,  w >= 0

whose optimum is ``1 / value'``. The slack basis is feasible, so no phase 1
is needed, and the row player's strategy is read off the dual (the reduced
costs of the slack columns).
"""

from __future__ import annotations

import numpy as np

TOL = 1e-9


class LPError(RuntimeError):
    """The simplex routine failed; for matrix games this indicates a bug."""


def simplex_max(c: np.ndarray, A_ub: np.ndarray, b_ub: np.ndarray, max_iter: int = 10_000):
    """Solve ``max c @ x  s.t.  A_ub @ x <= b_ub, x >= 0`` with ``b_ub >= 0``.

    Bland's rule is used for both the entering and leaving variable, so the
    method terminates without cycling. Returns ``(x, duals, objective)``.
    """
    A_ub = np.asarray(A_ub, dtype=np.float64)
    b_ub = np.asarray(b_ub, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, n = A_ub.shape
    if np.any(b_ub < 0):
        raise LPError("slack basis is infeasible: b_ub has negative entries")

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A_ub
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b_ub
    T[m, :n] = -c
    basis = list(range(n, n + m))

    for _ in range(max_iter):
        entering = np.flatnonzero(T[m, :-1] < -TOL)
        if entering.size == 0:
            break
        j = entering[0]
        col = T[:m, j]
        rows = np.flatnonzero(col > TOL)
        if rows.size == 0:
            raise LPError("objective is unbounded")
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + TOL]
        i = min(ties, key=lambda row: basis[row])
        T[i] /= T[i, j]
        for k in range(m + 1):
            if k != i and T[k, j] != 0.0:
                T[k] -= T[k, j] * T[i]
        basis[i] = j
    else:
        raise LPError(f"simplex did not converge in {max_iter} pivots")

    x = np.zeros(n + m)
    for row, var in enumerate(basis):
        x[var] = T[row, -1]
    duals = T[m, n:n + m].copy()
    return x[:n], duals, T[m, -1]


def _to_distribution(v: np.ndarray) -> np.ndarray:
    v = np.clip(v, 0.0, None)
    total = v.sum()
    if total <= 0:
        raise LPError("degenerate strategy with zero mass")
    return v / total


def solve_matrix_game(M) -> tuple[np.ndarray, np.ndarray, float]:
    """Return ``(x, y, value)`` for the zero-sum game with row-player payoff ``M``."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or 0 in M.shape:
        raise ValueError(f"payoff matrix must be a non-empty 2-d array, got shape {M.shape}")
    shift = 1.0 - M.min()
    Mp = M + shift
    rows, cols = Mp.shape
    w, u, total = simplex_max(np.ones(cols), Mp, np.ones(rows))
    if total <= TOL:
        raise LPError("matrix-game LP returned a non-positive objective")
    x = _to_distribution(u)
    y = _to_distribution(w)
    value = 1.0 / total - shift
    return x, y, value
