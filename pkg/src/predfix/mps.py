"""MPS export of standard-form instances, plus the matching reader.

Layout follows the classic fixed sections (ROWS, COLUMNS with
INTORG/INTEND markers around the binary block, RHS, BOUNDS) with values
printed at 17 significant digits so a round trip reproduces every
float64 exactly.  Wide numeric fields keep lines parseable by
free-format readers.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import IoFailure
from .milp import MilpInstance

_OBJ = "OBJ"


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _row_name(i: int) -> str:
    return f"C{i + 1:07d}"


def _col_name(j: int) -> str:
    return f"X{j + 1:07d}"


def export_mps(instance: MilpInstance, destination, name: str = "PREDFIX") -> None:
    """Write `instance` to `destination`; binaries become BV, continuous FR."""
    if not instance.is_standard:
        raise IoFailure("export_mps expects a standard-form instance")
    lines = [f"NAME          {name}", "ROWS", f" N  {_OBJ}"]
    for i in range(instance.n_rows):
        lines.append(f" L  {_row_name(i)}")

    lines.append("COLUMNS")
    csc = instance.a.tocsc()
    marker_open = "    MARKER                 'MARKER'                 'INTORG'"
    marker_close = "    MARKER                 'MARKER'                 'INTEND'"
    for j in range(instance.n_vars):
        if j == 0 and instance.n_binary > 0:
            lines.append(marker_open)
        if j == instance.n_binary and instance.n_binary > 0:
            lines.append(marker_close)
        entries = [(_OBJ, instance.c[j])]
        col = csc.getcol(j).tocoo()
        for i, v in sorted(zip(col.row.tolist(), col.data.tolist())):
            entries.append((_row_name(i), v))
        for k in range(0, len(entries), 2):
            pair = entries[k : k + 2]
            fields = "".join(f"  {rn:<10}{_fmt(v):>26}" for rn, v in pair)
            lines.append(f"    {_col_name(j):<10}{fields}")
    if instance.n_binary == instance.n_vars and instance.n_binary > 0:
        lines.append(marker_close)

    lines.append("RHS")
    for i in range(instance.n_rows):
        if instance.b[i] != 0.0:
            lines.append(f"    RHS         {_row_name(i):<10}{_fmt(instance.b[i]):>26}")

    lines.append("BOUNDS")
    for j in range(instance.n_vars):
        kind = "BV" if j < instance.n_binary else "FR"
        lines.append(f" {kind} BND         {_col_name(j)}")
    lines.append("ENDATA")

    try:
        Path(destination).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {destination}: {exc}") from exc


def read_mps(source) -> MilpInstance:
    """Parse a file produced by `export_mps` back into an instance."""
    try:
        text = Path(source).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read {source}: {exc}") from exc

    section = None
    row_index: dict[str, int] = {}
    col_index: dict[str, int] = {}
    entries: list[tuple[int, int, float]] = []
    obj: dict[int, float] = {}
    rhs: dict[int, float] = {}
    binary_cols: set[int] = set()
    in_integer_block = False

    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" ") and not raw.startswith("\t"):
            section = raw.split()[0]
            continue
        fields = raw.split()
        if section == "ROWS":
            sense, rname = fields
            if sense == "N":
                continue
            if sense != "L":
                raise IoFailure(f"unsupported row sense {sense}")
            row_index[rname] = len(row_index)
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1] == "'MARKER'":
                in_integer_block = fields[2] == "'INTORG'"
                continue
            cname = fields[0]
            if cname not in col_index:
                col_index[cname] = len(col_index)
            j = col_index[cname]
            if in_integer_block:
                binary_cols.add(j)
            for rname, value in zip(fields[1::2], fields[2::2]):
                if rname == _OBJ:
                    obj[j] = float(value)
                else:
                    entries.append((row_index[rname], j, float(value)))
        elif section == "RHS":
            for rname, value in zip(fields[1::2], fields[2::2]):
                rhs[row_index[rname]] = float(value)
        elif section == "BOUNDS":
            continue

    n_vars, n_rows = len(col_index), len(row_index)
    if binary_cols and binary_cols != set(range(len(binary_cols))):
        raise IoFailure("binary columns are not a leading block")
    c = np.zeros(n_vars)
    for j, v in obj.items():
        c[j] = v
    b = np.zeros(n_rows)
    for i, v in rhs.items():
        b[i] = v
    if entries:
        rows, cols, vals = zip(*entries)
        a = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_vars)).tocsr()
    else:
        a = sp.csr_matrix((n_rows, n_vars))
    return MilpInstance(
        c=c,
        a=a,
        b=b,
        n_binary=len(binary_cols),
        n_continuous=n_vars - len(binary_cols),
    )
