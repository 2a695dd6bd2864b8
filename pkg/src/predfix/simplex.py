"""Dense two-phase primal simplex with Bland's rule.

Solves `min c'x  s.t.  Ax <= b` with per-variable bounds, including free
variables.  Bland's entering/leaving rule guarantees termination without
cycling; the pivot budget is only a safety net.  Sized for desk-scale
problems (up to a few hundred rows), where a dense tableau is simplest.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import IterationLimit

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one exact solve (LP or enumeration)."""

    status: str
    assignment: np.ndarray | None
    objective: float | None
    duration: float
    nodes: int  # enumerated assignments, or simplex pivots for pure LPs


def _pivot(tableau, r, j):
    tableau[r, :] /= tableau[r, j]
    for i in range(tableau.shape[0]):
        if i != r and tableau[i, j] != 0.0:
            tableau[i, :] -= tableau[i, j] * tableau[r, :]


def _bland_simplex(tableau, basis, max_pivots):
    """Pivot in place until optimal or unbounded; returns (status, pivots).

    The last row holds reduced costs (minimization: a column may enter
    while its cost is negative), the last column the rhs.
    """
    pivots = 0
    while True:
        costs = tableau[-1, :-1]
        entering = np.flatnonzero(costs < -_COST_TOL)
        if entering.size == 0:
            return OPTIMAL, pivots
        j = int(entering[0])  # Bland: smallest-index entering column
        col = tableau[:-1, j]
        rows = np.flatnonzero(col > _PIVOT_TOL)
        if rows.size == 0:
            return UNBOUNDED, pivots
        ratios = tableau[rows, -1] / col[rows]
        tied = rows[ratios <= ratios.min() + _PIVOT_TOL]
        r = int(tied[np.argmin([basis[t] for t in tied])])  # smallest basic index
        _pivot(tableau, r, j)
        basis[r] = j
        pivots += 1
        if pivots > max_pivots:
            raise IterationLimit(f"exceeded {max_pivots} pivots; cycling reported")


def _to_nonnegative_form(c, a, b, bounds):
    """Rewrite general-bound variables as nonnegative columns.

    Lower-bounded variables are shifted, upper-only ones mirrored, free
    ones split into a positive/negative pair.  Finite upper bounds of
    shifted variables become extra cap rows.  Returns the rewritten data
    plus a `recover` map back to the original variable space.
    """
    n = len(c)
    plan = []
    col_blocks, c_parts = [], []
    b2 = b.astype(float).copy()
    caps = []  # (rewritten column, rhs) for x' <= hi - lo
    k = 0
    for j in range(n):
        lo, hi = bounds[j]
        lo = None if lo is not None and not np.isfinite(lo) else lo
        hi = None if hi is not None and not np.isfinite(hi) else hi
        col = a[:, j] if a.size else np.zeros(0)
        if lo is not None:
            plan.append(("shift", j, k, lo))
            col_blocks.append(col)
            c_parts.append(c[j])
            b2 -= col * lo
            if hi is not None:
                caps.append((k, hi - lo))
            k += 1
        elif hi is not None:
            plan.append(("mirror", j, k, hi))
            col_blocks.append(-col)
            c_parts.append(-c[j])
            b2 -= col * hi
            k += 1
        else:
            plan.append(("split", j, k, None))
            col_blocks.append(col)
            col_blocks.append(-col)
            c_parts.append(c[j])
            c_parts.append(-c[j])
            k += 2

    a2 = np.column_stack(col_blocks) if col_blocks else np.zeros((len(b), 0))
    if caps:
        cap_rows = np.zeros((len(caps), k))
        for i, (col_idx, _) in enumerate(caps):
            cap_rows[i, col_idx] = 1.0
        a2 = np.vstack([a2, cap_rows])
        b2 = np.concatenate([b2, [rhs for _, rhs in caps]])

    def recover(x2):
        x = np.zeros(n)
        for kind, j, idx, bound in plan:
            if kind == "shift":
                x[j] = bound + x2[idx]
            elif kind == "mirror":
                x[j] = bound - x2[idx]
            else:
                x[j] = x2[idx] - x2[idx + 1]
        return x

    return np.array(c_parts), a2, b2, recover


def solve_lp(c, a, b, bounds=None, max_pivots=None) -> SolveReport:
    """Solve `min c'x  s.t.  ax <= b, lo <= x <= hi` exactly.

    `bounds` is one (lo, hi) pair per variable; None means unbounded on
    that side and the default is (0, None).  Returns a report whose
    status is optimal, infeasible, or unbounded; an optimal assignment
    satisfies the constraints within 1e-8.
    """
    started = time.perf_counter()
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    a = np.asarray(a, dtype=float).reshape(len(b), len(c))
    if bounds is None:
        bounds = [(0.0, None)] * len(c)

    c2, a2, b2, recover = _to_nonnegative_form(c, a, b, bounds)
    m, n_struct = a2.shape
    n_slack = m
    neg = b2 < 0
    art_rows = np.flatnonzero(neg)
    n_art = len(art_rows)
    total = n_struct + n_slack + n_art
    if max_pivots is None:
        max_pivots = 10 * (m + total)

    tableau = np.zeros((m + 1, total + 1))
    sign = np.where(neg, -1.0, 1.0)
    tableau[:-1, :n_struct] = a2 * sign[:, None]
    tableau[:-1, n_struct : n_struct + n_slack] = np.diag(sign)
    tableau[:-1, -1] = b2 * sign
    art_of_row = {int(i): n_struct + n_slack + idx for idx, i in enumerate(art_rows)}
    for i, col in art_of_row.items():
        tableau[i, col] = 1.0
    basis = [art_of_row.get(i, n_struct + i) for i in range(m)]

    pivots_total = 0
    if n_art:
        # Phase 1: minimize the artificial sum.
        for i in art_rows:
            tableau[-1, :] -= tableau[i, :]
        tableau[-1, n_struct + n_slack : total] = 0.0
        status, pivots = _bland_simplex(tableau, basis, max_pivots)
        pivots_total += pivots
        if status != OPTIMAL or -tableau[-1, -1] > 1e-8:
            return SolveReport(INFEASIBLE, None, None, time.perf_counter() - started, pivots_total)
        # Drive leftover artificials out; drop rows that turned redundant.
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= n_struct + n_slack:
                cols = np.flatnonzero(np.abs(tableau[r, : n_struct + n_slack]) > _PIVOT_TOL)
                if cols.size == 0:
                    keep[r] = False
                else:
                    _pivot(tableau, r, int(cols[0]))
                    basis[r] = int(cols[0])
        if not keep.all():
            tableau = tableau[np.concatenate([np.flatnonzero(keep), [m]])]
            basis = [basis[r] for r in np.flatnonzero(keep)]
            m = len(basis)
        tableau[:, n_struct + n_slack : total] = 0.0  # bar artificials from re-entering

    # Phase 2: the true objective.
    tableau[-1, :] = 0.0
    tableau[-1, :n_struct] = c2
    for r, bj in enumerate(basis):
        if bj < n_struct and c2[bj] != 0.0:
            tableau[-1, :] -= c2[bj] * tableau[r, :]
    status, pivots = _bland_simplex(tableau, basis, max_pivots)
    pivots_total += pivots
    if status == UNBOUNDED:
        return SolveReport(UNBOUNDED, None, None, time.perf_counter() - started, pivots_total)

    x2 = np.zeros(total)
    for r, bj in enumerate(basis):
        x2[bj] = tableau[r, -1]
    x = recover(x2[:n_struct])
    return SolveReport(OPTIMAL, x, float(c @ x), time.perf_counter() - started, pivots_total)
