"""Per-node parameter triplets padded to dataset-level maxima.

A variable node j collects one (a_ij, b_i, c_j) triplet per constraint
it appears in; a constraint node i collects one per variable it touches.
Blocks are padded with (0, 0, 0) rows up to the maxima m_c / m_v so all
instances share tensor shapes, with masks marking the real rows.
Downstream aggregation must be symmetric, so the fixed ascending-index
ordering used here cannot affect results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, MaximaExceeded
from .milp import MilpInstance


@dataclass(frozen=True)
class NodeTriplets:
    variable_triplets: np.ndarray  # (n_vars, m_c, 3)
    variable_mask: np.ndarray  # (n_vars, m_c)
    constraint_triplets: np.ndarray  # (n_rows, m_v, 3)
    constraint_mask: np.ndarray  # (n_rows, m_v)
    m_c: int
    m_v: int


def _column_counts(instance: MilpInstance) -> np.ndarray:
    return np.diff(instance.a.tocsc().indptr)


def _row_counts(instance: MilpInstance) -> np.ndarray:
    return np.diff(instance.a.tocsr().indptr)


def dataset_maxima(series_collection) -> tuple[int, int]:
    """(m_c, m_v): max nonzeros of any column / any row across the dataset."""
    m_c, m_v, seen = 0, 0, False
    for series in series_collection:
        for instance in series.instances:
            seen = True
            if instance.n_rows and instance.a.nnz:
                m_c = max(m_c, int(_column_counts(instance).max()))
                m_v = max(m_v, int(_row_counts(instance).max()))
    if not seen:
        raise EmptyDataset("no instances in collection")
    return m_c, m_v


def build_triplets(instance: MilpInstance, m_c: int, m_v: int) -> NodeTriplets:
    """Assemble padded triplet blocks; raises if the maxima are too small
    (which means they were computed on a different dataset)."""
    nv, nr = instance.n_vars, instance.n_rows
    var_t = np.zeros((nv, m_c, 3))
    var_m = np.zeros((nv, m_c))
    con_t = np.zeros((nr, m_v, 3))
    con_m = np.zeros((nr, m_v))

    csc = instance.a.tocsc()
    csc.sort_indices()
    for j in range(nv):
        rows = csc.indices[csc.indptr[j] : csc.indptr[j + 1]]
        vals = csc.data[csc.indptr[j] : csc.indptr[j + 1]]
        if len(rows) > m_c:
            raise MaximaExceeded(f"variable {j} appears in {len(rows)} > m_c={m_c} rows")
        var_t[j, : len(rows), 0] = vals
        var_t[j, : len(rows), 1] = instance.b[rows]
        var_t[j, : len(rows), 2] = instance.c[j]
        var_m[j, : len(rows)] = 1.0

    csr = instance.a.tocsr()
    csr.sort_indices()
    for i in range(nr):
        cols = csr.indices[csr.indptr[i] : csr.indptr[i + 1]]
        vals = csr.data[csr.indptr[i] : csr.indptr[i + 1]]
        if len(cols) > m_v:
            raise MaximaExceeded(f"constraint {i} touches {len(cols)} > m_v={m_v} variables")
        con_t[i, : len(cols), 0] = vals
        con_t[i, : len(cols), 1] = instance.b[i]
        con_t[i, : len(cols), 2] = instance.c[cols]
        con_m[i, : len(cols)] = 1.0

    return NodeTriplets(var_t, var_m, con_t, con_m, m_c, m_v)
