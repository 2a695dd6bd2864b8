"""Binary MILP instances in standard form: minimize c'z subject to Az <= b.

Variables are ordered binaries-first; equality rows are only a transient
annotation that `to_standard_form` removes by splitting each one into a
<=/>= pair.  All operations return new instances and never mutate inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, ZeroNormRow, ZeroObjective

FEASIBILITY_TOL = 1e-6


def _frozen_array(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _csr(a, shape=None) -> sp.csr_matrix:
    m = sp.csr_matrix(a, shape=shape, dtype=float)
    m.eliminate_zeros()
    m.sum_duplicates()
    return m


@dataclass(frozen=True)
class MilpInstance:
    """One problem `min c'z  s.t.  Az <= b` with binaries indexed first.

    `equality_rows` marks rows that still mean `a'z == b`; it is None once
    the instance is in standard form.  The canonical relation for
    unmarked rows is always `<=`.
    """

    c: np.ndarray
    a: sp.csr_matrix
    b: np.ndarray
    n_binary: int
    n_continuous: int = 0
    equality_rows: np.ndarray | None = None
    relation: str = field(default="<=", repr=False)

    def __post_init__(self):
        object.__setattr__(self, "c", _frozen_array(self.c))
        object.__setattr__(self, "b", _frozen_array(self.b))
        object.__setattr__(self, "a", _csr(self.a, shape=(len(self.b), len(self.c))))
        if self.equality_rows is not None:
            object.__setattr__(
                self, "equality_rows", _frozen_array(self.equality_rows, dtype=bool)
            )
            if len(self.equality_rows) != self.n_rows:
                raise DimensionMismatch("equality mask length != row count")
        if self.n_binary + self.n_continuous != self.n_vars:
            raise DimensionMismatch(
                f"{self.n_binary} binary + {self.n_continuous} continuous "
                f"!= {self.n_vars} objective coefficients"
            )

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)

    @property
    def is_standard(self) -> bool:
        return self.equality_rows is None or not self.equality_rows.any()


def to_standard_form(instance: MilpInstance) -> MilpInstance:
    """Split every equality row `a'z == b` into `a'z <= b` and `-a'z <= -b`.

    Inequality rows pass through in their original order; the split pair
    replaces each equality row in place, so row order stays stable.
    """
    if instance.is_standard:
        return replace(instance, equality_rows=None)
    eq = instance.equality_rows
    blocks_a, blocks_b = [], []
    a_lil = instance.a.tocsr()
    for i in range(instance.n_rows):
        row = a_lil.getrow(i)
        blocks_a.append(row)
        blocks_b.append(instance.b[i])
        if eq[i]:
            blocks_a.append(-row)
            blocks_b.append(-instance.b[i])
    return MilpInstance(
        c=instance.c,
        a=sp.vstack(blocks_a, format="csr"),
        b=np.array(blocks_b),
        n_binary=instance.n_binary,
        n_continuous=instance.n_continuous,
    )


def _row_norms(instance: MilpInstance, p: float) -> np.ndarray:
    a_abs = np.abs(instance.a.toarray()) if instance.n_rows else np.empty((0, instance.n_vars))
    stacked = np.concatenate([a_abs, np.abs(instance.b)[:, None]], axis=1)
    if p == 2:
        return np.sqrt((stacked**2).sum(axis=1))
    return (stacked**p).sum(axis=1) ** (1.0 / p)


def normalize(instance: MilpInstance, p: float = 2) -> MilpInstance:
    """Scale each row (a_i, b_i) by 1/||[a_i; b_i]||_p and c by 1/||c||_p.

    Keeps the relative weights within each constraint and within the
    objective, which is what makes the model scale-invariant.
    """
    if not instance.is_standard:
        raise DimensionMismatch("normalize expects a standard-form instance")
    return _normalize_scaled(instance, p, row_factor=1.0, obj_factor=1.0)


def normalize_rescaled(instance: MilpInstance, reference_size: int) -> MilpInstance:
    """2-norm normalization with a size correction against `reference_size`.

    A model trained on instances with `reference_size` variables sees test
    parameters at the same magnitude when rows are additionally scaled by
    sqrt((n_vars + 1) / (reference_size + 1)) and the objective by
    sqrt(n_vars / reference_size).  Equal sizes reduce to `normalize`.
    """
    if reference_size <= 0 or instance.n_vars <= 0:
        raise DimensionMismatch("sizes must be positive")
    if not instance.is_standard:
        raise DimensionMismatch("normalize expects a standard-form instance")
    row_factor = np.sqrt((instance.n_vars + 1.0) / (reference_size + 1.0))
    obj_factor = np.sqrt(instance.n_vars / float(reference_size))
    return _normalize_scaled(instance, 2, row_factor, obj_factor)


def _normalize_scaled(instance, p, row_factor, obj_factor):
    norms = _row_norms(instance, p)
    if np.any(norms == 0):
        raise ZeroNormRow(f"rows {np.flatnonzero(norms == 0).tolist()} have zero norm")
    c_norm = np.linalg.norm(instance.c, ord=p)
    if c_norm == 0:
        raise ZeroObjective("objective vector has zero norm")
    scale = sp.diags(row_factor / norms) if instance.n_rows else sp.csr_matrix((0, 0))
    a_scaled = (scale @ instance.a).tocsr() if instance.n_rows else instance.a
    return MilpInstance(
        c=instance.c * (obj_factor / c_norm),
        a=a_scaled,
        b=instance.b * (row_factor / norms),
        n_binary=instance.n_binary,
        n_continuous=instance.n_continuous,
    )


@dataclass(frozen=True)
class BipartiteGraph:
    """Variable/constraint graph with coefficient-weighted edges.

    Node order is variables first, then constraints.  The adjacency is
    [[I, A'], [A, I]], so every node carries a unit self-loop and an edge
    (j, n_vars + i) exists iff a_ij != 0.
    """

    adjacency: sp.csr_matrix
    n_variable_nodes: int
    n_constraint_nodes: int

    @property
    def n_nodes(self) -> int:
        return self.n_variable_nodes + self.n_constraint_nodes


def build_bipartite_graph(instance: MilpInstance) -> BipartiteGraph:
    dz, dc = instance.n_vars, instance.n_rows
    adj = sp.bmat(
        [
            [sp.identity(dz, format="csr"), instance.a.T],
            [instance.a, sp.identity(dc, format="csr")],
        ],
        format="csr",
    )
    adj.eliminate_zeros()
    return BipartiteGraph(adjacency=adj, n_variable_nodes=dz, n_constraint_nodes=dc)


def _check_assignment(instance: MilpInstance, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (instance.n_vars,):
        raise DimensionMismatch(f"assignment shape {z.shape} != ({instance.n_vars},)")
    return z


def check_feasibility(instance: MilpInstance, z, tol: float = FEASIBILITY_TOL) -> bool:
    """True iff max_i (a_i'z - b_i) <= tol (absolute, on normalized data)."""
    z = _check_assignment(instance, z)
    if instance.n_rows == 0:
        return True
    return float(np.max(instance.a @ z - instance.b)) <= tol


def objective(instance: MilpInstance, z) -> float:
    z = _check_assignment(instance, z)
    return float(instance.c @ z)
