"""Confidence scoring, variable fixing, and reduced-problem solving.

The score s_j = min(mu_j, 1 - mu_j) + gamma * sigma_j is low for
confident predictions; the requested fraction of lowest-score binaries
is fixed at the rounded Beta mean and the residual problem goes to the
exact oracle (or to an MPS file for an external solver).  Changing rho
or gamma reuses model outputs untouched; nothing here retrains.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .milp import MilpInstance
from .mps import export_mps
from .oracle import ENUMERATION_CAP, enumerate_solve
from .simplex import OPTIMAL, SolveReport

ORACLE = "oracle"
EXPORT = "export"
EXPORTED = "exported"
DEFAULT_GAMMA_GRID = (0.0, 0.5, 1.0, 2.0, 4.0)


def beta_moments(alpha, beta):
    """Mean and standard deviation of Beta(alpha, beta)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    total = alpha + beta
    mu = alpha / total
    sigma = np.sqrt(alpha * beta / (total**2 * (total + 1.0)))
    return mu, sigma


@dataclass(frozen=True)
class SelectionResult:
    """Indices to fix (ascending), their 0/1 values, and the full score vector."""

    indices: np.ndarray
    values: np.ndarray
    scores: np.ndarray
    rho: float
    gamma: float

    @property
    def n_fixed(self) -> int:
        return len(self.indices)


def score_and_select(mu, sigma, gamma: float, rho: float) -> SelectionResult:
    """Fix the ceil(rho * n) lowest-score variables at round(mu).

    Score ties resolve to the lower variable index; mu = 0.5 rounds up
    to 1 by convention.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if gamma < 0 or not (0.0 <= rho <= 1.0):
        raise ValueError("need gamma >= 0 and rho in [0, 1]")
    scores = np.minimum(mu, 1.0 - mu) + gamma * sigma
    k = math.ceil(rho * len(mu))
    order = np.lexsort((np.arange(len(mu)), scores))
    chosen = np.sort(order[:k])
    return SelectionResult(
        indices=chosen,
        values=(mu[chosen] >= 0.5).astype(float),
        scores=scores,
        rho=rho,
        gamma=gamma,
    )


def reduce_instance(instance: MilpInstance, selection: SelectionResult):
    """Substitute the fixed binaries into A and b and drop their columns.

    Returns (reduced instance, objective offset c_fixed . z_fixed).
    """
    fixed = selection.indices
    keep_binary = np.setdiff1d(np.arange(instance.n_binary), fixed)
    keep = np.concatenate([keep_binary, np.arange(instance.n_binary, instance.n_vars)])
    a = instance.a.tocsc()
    b_new = instance.b - (a[:, fixed] @ selection.values if len(fixed) else 0.0)
    reduced = MilpInstance(
        c=instance.c[keep],
        a=a[:, keep].tocsr(),
        b=np.asarray(b_new).ravel(),
        n_binary=len(keep_binary),
        n_continuous=instance.n_continuous,
    )
    offset = float(instance.c[fixed] @ selection.values) if len(fixed) else 0.0
    return reduced, offset


def _expand_assignment(instance, selection, reduced_assignment):
    z = np.empty(instance.n_vars)
    z[selection.indices] = selection.values
    free_binary = np.setdiff1d(np.arange(instance.n_binary), selection.indices)
    z[free_binary] = reduced_assignment[: len(free_binary)]
    z[instance.n_binary :] = reduced_assignment[len(free_binary) :]
    return z


def reduce_and_solve(
    instance: MilpInstance,
    selection: SelectionResult,
    backend: str = ORACLE,
    max_binaries: int = ENUMERATION_CAP,
    export_path=None,
) -> SolveReport:
    """Solve the instance with the selected binaries fixed.

    Oracle backend: exact enumeration of the residual; reports
    infeasible when no completion exists.  Export backend: write the
    reduced problem as MPS and return status 'exported'.
    """
    reduced, offset = reduce_instance(instance, selection)
    if backend == EXPORT:
        started = time.perf_counter()
        export_mps(reduced, export_path)
        return SolveReport(EXPORTED, None, None, time.perf_counter() - started, 0)
    if backend != ORACLE:
        raise ValueError(f"unknown backend {backend!r}")
    label = enumerate_solve(reduced, max_binaries=max_binaries)
    if label.status != OPTIMAL:
        return SolveReport(label.status, None, None, label.duration, 1 << reduced.n_binary)
    return SolveReport(
        status=OPTIMAL,
        assignment=_expand_assignment(instance, selection, label.assignment),
        objective=label.objective + offset,
        duration=label.duration,
        nodes=1 << reduced.n_binary,
    )
