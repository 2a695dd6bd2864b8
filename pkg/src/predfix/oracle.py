"""Exact ground-truth labeling by exhaustive enumeration.

Every binary assignment is scanned in lexicographic order (most
significant variable first), so optimal-value ties always resolve to the
lexicographically smallest vector, making labels deterministic across
runs and platforms.  Instances with continuous variables get a simplex
solve of the residual LP per feasible binary assignment.

Pure-binary single-constraint instances above the enumeration cap are
solved by an equivalent meet-in-the-middle scan that preserves the exact
optimum and tie-break; plain enumeration at 2^30 would take hours per
instance, which the knapsack-style families need to avoid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import TooManyBinaries
from .milp import FEASIBILITY_TOL, MilpInstance
from .simplex import INFEASIBLE, OPTIMAL, UNBOUNDED, SolveReport, solve_lp

ENUMERATION_CAP = 22
_MITM_CAP = 40
_CHUNK_BITS = 16


@dataclass(frozen=True)
class Label:
    """Reference solution for one instance."""

    status: str
    assignment: np.ndarray | None
    objective: float | None
    duration: float = 0.0


def bit_matrix(start: int, stop: int, n_bits: int) -> np.ndarray:
    """Rows are the binary expansions of start..stop-1, most significant first."""
    idx = np.arange(start, stop, dtype=np.uint64)
    shifts = np.arange(n_bits - 1, -1, -1, dtype=np.uint64)
    return ((idx[:, None] >> shifts[None, :]) & np.uint64(1)).astype(float)


def _scan_pure_binary(instance: MilpInstance, tol: float):
    nb = instance.n_binary
    a = instance.a.toarray()
    best_obj, best_idx = None, None
    for start in range(0, 1 << nb, 1 << _CHUNK_BITS):
        stop = min(start + (1 << _CHUNK_BITS), 1 << nb)
        z = bit_matrix(start, stop, nb)
        feasible = np.ones(stop - start, dtype=bool)
        if instance.n_rows:
            feasible = (z @ a.T <= instance.b[None, :] + tol).all(axis=1)
        if not feasible.any():
            continue
        objs = z[feasible] @ instance.c
        j = int(np.argmin(objs))  # first minimum: smallest index within chunk
        if best_obj is None or objs[j] < best_obj:
            best_obj = float(objs[j])
            best_idx = start + int(np.flatnonzero(feasible)[j])
    if best_obj is None:
        return None
    z = bit_matrix(best_idx, best_idx + 1, nb)[0]
    return best_obj, z


def _scan_mixed(instance: MilpInstance, tol: float):
    nb, nc = instance.n_binary, instance.n_continuous
    a = instance.a.toarray()
    a_bin, a_cont = a[:, :nb], a[:, nb:]
    c_bin, c_cont = instance.c[:nb], instance.c[nb:]
    free = [(None, None)] * nc
    best = None
    for idx in range(1 << nb):
        zb = bit_matrix(idx, idx + 1, nb)[0]
        residual = instance.b - a_bin @ zb
        report = solve_lp(c_cont, a_cont, residual, bounds=free)
        if report.status == UNBOUNDED:
            return UNBOUNDED
        if report.status != OPTIMAL:
            continue
        total = float(c_bin @ zb) + report.objective
        if best is None or total < best[0]:
            best = (total, np.concatenate([zb, report.assignment]))
    return best


def enumerate_solve(
    instance: MilpInstance,
    max_binaries: int = ENUMERATION_CAP,
    tol: float = FEASIBILITY_TOL,
) -> Label:
    """Globally optimal Label via exhaustive search over binary assignments.

    Beyond `max_binaries` only the single-inequality pure-binary form is
    accepted (meet-in-the-middle, up to 40 binaries); anything else
    raises TooManyBinaries.
    """
    started = time.perf_counter()
    nb = instance.n_binary
    if nb > max_binaries:
        if instance.n_continuous == 0 and instance.n_rows == 1 and nb <= _MITM_CAP:
            result = _knapsack_mitm(instance, tol)
        else:
            raise TooManyBinaries(
                f"{nb} binaries exceed cap {max_binaries} and no fast path applies"
            )
    elif instance.n_continuous == 0:
        result = _scan_pure_binary(instance, tol)
    else:
        result = _scan_mixed(instance, tol)

    elapsed = time.perf_counter() - started
    if result == UNBOUNDED:
        return Label(UNBOUNDED, None, None, elapsed)
    if result is None:
        return Label(INFEASIBLE, None, None, elapsed)
    obj, z = result
    return Label(OPTIMAL, z, float(obj), elapsed)


def solve_report(instance: MilpInstance, **kwargs) -> SolveReport:
    """enumerate_solve wrapped in a SolveReport with the node count."""
    label = enumerate_solve(instance, **kwargs)
    return SolveReport(
        status=label.status,
        assignment=label.assignment,
        objective=label.objective,
        duration=label.duration,
        nodes=1 << instance.n_binary,
    )


def _prefix_best(values: np.ndarray, indices: np.ndarray):
    """Running (min value, min index among its achievers) over a prefix."""
    best_v = np.empty_like(values)
    best_i = np.empty_like(indices)
    bv, bi = np.inf, -1
    for k in range(len(values)):
        v, i = values[k], indices[k]
        if v < bv or (v == bv and i < bi):
            bv, bi = v, i
        best_v[k] = bv
        best_i[k] = bi
    return best_v, best_i


def _knapsack_mitm(instance: MilpInstance, tol: float):
    """Exact min c'z s.t. w'z <= cap over binaries, split-half scan.

    Scanning the high half in ascending lexicographic order and taking
    the min-value/min-index completion of the low half reproduces the
    full scan's tie-break exactly.
    """
    n = instance.n_binary
    w = instance.a.toarray()[0]
    cap = float(instance.b[0])
    c = instance.c
    n_hi = n // 2
    n_lo = n - n_hi
    z_hi = bit_matrix(0, 1 << n_hi, n_hi)
    z_lo = bit_matrix(0, 1 << n_lo, n_lo)
    v_hi, w_hi = z_hi @ c[:n_hi], z_hi @ w[:n_hi]
    v_lo, w_lo = z_lo @ c[n_hi:], z_lo @ w[n_hi:]
    idx_lo = np.arange(1 << n_lo, dtype=np.int64)
    order = np.lexsort((idx_lo, w_lo))
    w_sorted = w_lo[order]
    best_v, best_i = _prefix_best(v_lo[order], idx_lo[order])

    best = None
    for hi in range(1 << n_hi):
        k = int(np.searchsorted(w_sorted, cap - w_hi[hi] + tol, side="right")) - 1
        if k < 0:
            continue
        total = v_hi[hi] + best_v[k]
        if best is None or total < best[0]:
            best = (float(total), (hi << n_lo) | int(best_i[k]))
    if best is None:
        return None
    z = bit_matrix(best[1], best[1] + 1, n)[0]
    return best[0], z
