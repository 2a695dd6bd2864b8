"""Metrics over a fixed model: accuracy, infeasibility, optimality gap,
and time ratios for a grid of fixing fractions.

Model outputs are computed once per series and reused byte-identically
across every (rho, gamma) combination.  The full-problem time t_100 is
measured with the same in-process backend as the reduced-problem time
t_p, so their ratio does not mix environments.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import MissingLabels
from .features import build_triplets
from .milp import MilpInstance
from .model import Model, make_batch
from .oracle import ENUMERATION_CAP
from .selection import (
    DEFAULT_GAMMA_GRID,
    ORACLE,
    SelectionResult,
    beta_moments,
    reduce_and_solve,
    score_and_select,
)
from .seriesio import InstanceSeries
from .simplex import OPTIMAL

_REL_EPS = 1e-9


@dataclass
class EvalRecord:
    """Per-instance outcome at one fixing fraction."""

    series_id: str
    t: int
    rho: float
    gamma: float
    n_fixed: int
    accuracy: float | None
    feasible: bool | None
    objective: float | None
    reference_objective: float
    gap_abs: float | None
    gap_rel: float | None
    time_reduced: float | None
    time_full: float | None


def series_outputs(model: Model, series: InstanceSeries, m_c: int, m_v: int):
    """Forward one series (state threaded across t); plain-array outputs."""
    batches = [
        make_batch([inst], [build_triplets(inst, m_c, m_v)]) for inst in series.instances
    ]
    per_step, _ = model.forward_series(batches)
    return [
        (step[0].alpha_values, step[0].beta_values, step[0].continuous_values)
        for step in per_step
    ]


def _reference(series: InstanceSeries, t: int):
    label = series.labels[t]
    if label is None or label.status != OPTIMAL or label.assignment is None:
        raise MissingLabels(f"series {series.series_id} t={t} has no optimal reference label")
    return label


def evaluate(
    series_list: list[InstanceSeries],
    model: Model,
    m_c: int,
    m_v: int,
    rho_grid,
    gamma: float,
    backend: str = ORACLE,
    solve: bool = True,
    max_binaries: int = ENUMERATION_CAP,
):
    """Returns (per-instance records, per-rho summary rows)."""
    records: list[EvalRecord] = []
    for series in series_list:
        outputs = series_outputs(model, series, m_c, m_v)
        for t, inst in enumerate(series.instances):
            label = _reference(series, t)
            alpha, beta, _ = outputs[t]
            mu, sigma = beta_moments(alpha, beta)
            time_full = None
            if solve:
                full = reduce_and_solve(
                    inst,
                    score_and_select(mu, sigma, gamma, 0.0),
                    backend=backend,
                    max_binaries=max_binaries,
                )
                time_full = full.duration
            for rho in rho_grid:
                selection = score_and_select(mu, sigma, gamma, rho)
                zb_true = label.assignment[: inst.n_binary]
                accuracy = None
                if selection.n_fixed:
                    accuracy = float(
                        np.mean(selection.values == zb_true[selection.indices])
                    )
                feasible = objective = gap_abs = gap_rel = time_reduced = None
                if solve:
                    report = reduce_and_solve(
                        inst, selection, backend=backend, max_binaries=max_binaries
                    )
                    feasible = report.status == OPTIMAL
                    time_reduced = report.duration
                    if feasible:
                        objective = report.objective
                        gap_abs = objective - label.objective
                        gap_rel = 100.0 * gap_abs / max(abs(label.objective), _REL_EPS)
                records.append(
                    EvalRecord(
                        series_id=series.series_id,
                        t=t,
                        rho=rho,
                        gamma=gamma,
                        n_fixed=selection.n_fixed,
                        accuracy=accuracy,
                        feasible=feasible,
                        objective=objective,
                        reference_objective=label.objective,
                        gap_abs=gap_abs,
                        gap_rel=gap_rel,
                        time_reduced=time_reduced,
                        time_full=time_full,
                    )
                )
    return records, summarize(records)


def _mean_std(values):
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def summarize(records: list[EvalRecord], method: str = "predfix") -> list[dict]:
    """One row per rho, mirroring the accuracy/infeasibility/gap tables.

    Gaps average over feasible instances only; the relative gap (percent)
    is the table-comparable figure, the absolute one is also kept.
    """
    rows = []
    for rho in sorted({r.rho for r in records}):
        batch = [r for r in records if r.rho == rho]
        acc_mean, acc_std = _mean_std([r.accuracy for r in batch if r.accuracy is not None])
        feas_flags = [r.feasible for r in batch if r.feasible is not None]
        inf_mean, inf_std = _mean_std([100.0 * (not f) for f in feas_flags])
        gap_abs_mean, gap_abs_std = _mean_std([r.gap_abs for r in batch if r.gap_abs is not None])
        gap_rel_mean, gap_rel_std = _mean_std([r.gap_rel for r in batch if r.gap_rel is not None])
        ratios = [
            r.time_reduced / r.time_full
            for r in batch
            if r.time_reduced is not None and r.time_full
        ]
        ratio_mean, ratio_std = _mean_std(ratios)
        rows.append(
            {
                "method": method,
                "rho": rho,
                "accuracy_mean": None if acc_mean is None else 100.0 * acc_mean,
                "accuracy_std": None if acc_std is None else 100.0 * acc_std,
                "infeasibility_mean": inf_mean,
                "infeasibility_std": inf_std,
                "gap_abs_mean": gap_abs_mean,
                "gap_abs_std": gap_abs_std,
                "gap_rel_mean": gap_rel_mean,
                "gap_rel_std": gap_rel_std,
                "time_ratio_mean": ratio_mean,
                "time_ratio_std": ratio_std,
                "n_instances": len(batch),
            }
        )
    return rows


def write_metric_table(path, rows: list[dict]) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def write_records(path, records: list[EvalRecord]) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(asdict(record)) + "\n")


def tune_gamma(
    series_list: list[InstanceSeries],
    model: Model,
    m_c: int,
    m_v: int,
    rho: float,
    gamma_grid=DEFAULT_GAMMA_GRID,
    backend: str = ORACLE,
    max_binaries: int = ENUMERATION_CAP,
) -> float:
    """Grid-pick gamma: least infeasibility, then best accuracy, then
    smallest gamma."""
    best = None
    for gamma in gamma_grid:
        _, summary = evaluate(
            series_list,
            model,
            m_c,
            m_v,
            [rho],
            gamma,
            backend=backend,
            max_binaries=max_binaries,
        )
        row = summary[0]
        infeas = row["infeasibility_mean"] if row["infeasibility_mean"] is not None else 0.0
        acc = row["accuracy_mean"] if row["accuracy_mean"] is not None else 0.0
        key = (infeas, -acc, gamma)
        if best is None or key < best[0]:
            best = (key, gamma)
    return best[1]
