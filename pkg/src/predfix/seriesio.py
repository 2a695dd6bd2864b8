"""Instance-series containers and line-delimited JSON persistence.

One JSON record per instance, `format_version: 1`.  Fields: `series`,
`t`, `family`, `n_binary`, `n_continuous`, `n_rows`, sparse `a` triplets
[row, col, value], dense `b` and `c`, and an optional `label` with
status/assignment/objective/duration.  Floats are serialized with
shortest round-trip repr, so a save/load cycle is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import IoFailure
from .milp import MilpInstance
from .oracle import Label

FORMAT_VERSION = 1


@dataclass
class InstanceSeries:
    """One temporal sequence of instances with optional per-step labels."""

    series_id: str
    instances: list[MilpInstance]
    labels: list[Label | None] = field(default_factory=list)
    family: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.labels:
            self.labels = [None] * len(self.instances)
        if len(self.labels) != len(self.instances):
            raise ValueError("labels must parallel instances")

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def n_labeled(self) -> int:
        return sum(1 for lab in self.labels if lab is not None)


def _instance_record(series: InstanceSeries, t: int) -> dict:
    inst = series.instances[t]
    if not inst.is_standard:
        raise IoFailure("only standard-form instances are persisted")
    coo = inst.a.tocoo()
    record = {
        "format_version": FORMAT_VERSION,
        "series": series.series_id,
        "t": t,
        "family": series.family,
        "n_binary": inst.n_binary,
        "n_continuous": inst.n_continuous,
        "n_rows": inst.n_rows,
        "a": [[int(i), int(j), float(v)] for i, j, v in zip(coo.row, coo.col, coo.data)],
        "b": inst.b.tolist(),
        "c": inst.c.tolist(),
        "label": None,
    }
    label = series.labels[t]
    if label is not None:
        record["label"] = {
            "status": label.status,
            "assignment": None if label.assignment is None else label.assignment.tolist(),
            "objective": label.objective,
            "duration": label.duration,
        }
    return record


def save_series(path, series_list: list[InstanceSeries]) -> None:
    try:
        with open(path, "w") as fh:
            for series in series_list:
                for t in range(len(series)):
                    fh.write(json.dumps(_instance_record(series, t)) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_series(path) -> list[InstanceSeries]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    by_series: dict[str, list[dict]] = {}
    order: list[str] = []
    for line in lines:
        if not line.strip():
            continue
        record = json.loads(line)
        if record.get("format_version") != FORMAT_VERSION:
            raise IoFailure(f"unsupported format_version {record.get('format_version')}")
        sid = record["series"]
        if sid not in by_series:
            by_series[sid] = []
            order.append(sid)
        by_series[sid].append(record)

    out = []
    for sid in order:
        records = sorted(by_series[sid], key=lambda r: r["t"])
        instances, labels = [], []
        for rec in records:
            n_rows, n_vars = rec["n_rows"], rec["n_binary"] + rec["n_continuous"]
            if rec["a"]:
                rows, cols, vals = zip(*rec["a"])
                a = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_vars)).tocsr()
            else:
                a = sp.csr_matrix((n_rows, n_vars))
            instances.append(
                MilpInstance(
                    c=np.array(rec["c"]),
                    a=a,
                    b=np.array(rec["b"]),
                    n_binary=rec["n_binary"],
                    n_continuous=rec["n_continuous"],
                )
            )
            lab = rec["label"]
            labels.append(
                None
                if lab is None
                else Label(
                    status=lab["status"],
                    assignment=None if lab["assignment"] is None else np.array(lab["assignment"]),
                    objective=lab["objective"],
                    duration=lab.get("duration", 0.0),
                )
            )
        out.append(
            InstanceSeries(
                series_id=sid,
                instances=instances,
                labels=labels,
                family=records[0].get("family"),
            )
        )
    return out
