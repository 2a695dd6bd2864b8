"""Training loop: series-level batches, scheduled loss mixing, Adam.

A batch is a set of equal-length series; the LSTM state threads through
each series' timesteps while members stay disjoint in one block graph.
Batch composition at step k depends only on (seed, k), so resuming from
a checkpoint reproduces the next step bit-identically.  The best
checkpoint by validation NLL (plain supervised NLL on labeled validation
instances) is kept alongside the final state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import NonFiniteValue
from .features import build_triplets, dataset_maxima
from .losses import (
    LossWeights,
    stacked_supervised_loss,
    stacked_unsupervised_loss,
    supervised_loss,
)
from .model import Model, make_batch
from .quadrature import cc_table
from .seriesio import InstanceSeries


@dataclass
class OptimizerConfig:
    """Adam settings with the warm-up/cosine learning-rate schedule."""

    lr_warmup_start: float = 1e-4
    lr_peak: float = 1e-2
    lr_warmup_steps: int = 500
    lr_decay_rate: float = 0.99
    weight_decay: float = 1e-5
    clip_norm: float = 10.0


def learning_rate(step: int, total_steps: int, opt: OptimizerConfig) -> float:
    """Linear warm-up to the peak, then a cosine envelope with a per-step
    multiplicative floor: lr = max(cosine(step), peak * rate^(step - warmup)).

    The floor turns the cosine's approach to zero into a gentle
    exponential tail instead of a hard stop.
    """
    if step < opt.lr_warmup_steps:
        frac = step / max(1, opt.lr_warmup_steps)
        return opt.lr_warmup_start + (opt.lr_peak - opt.lr_warmup_start) * frac
    span = max(1, total_steps - opt.lr_warmup_steps)
    progress = min(1.0, (step - opt.lr_warmup_steps) / span)
    cosine = opt.lr_peak * 0.5 * (1.0 + math.cos(math.pi * progress))
    floor = opt.lr_peak * opt.lr_decay_rate ** (step - opt.lr_warmup_steps)
    return max(cosine, floor)


@dataclass
class PreparedSeries:
    series: InstanceSeries
    triplets: list  # one NodeTriplets per timestep

    def __len__(self):
        return len(self.series)


@dataclass
class TrainResult:
    best_state: dict
    final_state: dict
    best_val: float
    history: list[dict] = field(default_factory=list)
    m_c: int = 0
    m_v: int = 0


def prepare_series(series_list, m_c, m_v) -> list[PreparedSeries]:
    return [
        PreparedSeries(s, [build_triplets(inst, m_c, m_v) for inst in s.instances])
        for s in series_list
    ]


def validation_nll(model: Model, prepared: list[PreparedSeries], table) -> float:
    """Summed supervised NLL over labeled validation instances (no
    regularizer, no class weights), defined before gamma/rho exist."""
    total = 0.0
    count = 0
    for ps in prepared:
        state = None
        for t, inst in enumerate(ps.series.instances):
            batch = make_batch([inst], [ps.triplets[t]])
            outputs, state = model.forward_batch(batch, state)
            label = ps.series.labels[t]
            if label is None or label.assignment is None:
                continue
            loss = supervised_loss(outputs, [label], table)
            total += float(loss.value)
            count += 1
    return total / max(count, 1)


def train(
    model: Model,
    train_series: list[InstanceSeries],
    val_series: list[InstanceSeries],
    weights: LossWeights,
    optimizer: OptimizerConfig,
    steps: int,
    batch_size: int = 8,
    seed: int = 0,
    val_every: int = 50,
    quadrature_order: int = 64,
    log=None,
) -> TrainResult:
    table = cc_table(quadrature_order)
    m_c, m_v = dataset_maxima(train_series)
    prepared = prepare_series(train_series, m_c, m_v)
    prepared_val = prepare_series(val_series, m_c, m_v) if val_series else []

    by_length: dict[int, list[int]] = {}
    for idx, ps in enumerate(prepared):
        by_length.setdefault(len(ps), []).append(idx)
    lengths = sorted(by_length)

    best_val = math.inf
    best_state = model.store.state_dict()
    history: list[dict] = []
    start = model.store.step

    for step in range(start, steps):
        rng = np.random.default_rng([seed, step])
        length = lengths[rng.integers(len(lengths))] if len(lengths) > 1 else lengths[0]
        pool = by_length[length]
        take = min(batch_size, len(pool))
        members = [prepared[i] for i in rng.choice(pool, size=take, replace=False)]

        lam = weights.lam.value(step)
        lam_reg = weights.lam_reg.value(step)
        lam_c = weights.lam_c.value(step)

        total = ad.constant(0.0)
        sup_value = 0.0
        unsup_value = 0.0
        state = None
        try:
            for t in range(length):
                batch = make_batch(
                    [ps.series.instances[t] for ps in members],
                    [ps.triplets[t] for ps in members],
                )
                outputs, state = model.forward_batch(batch, state)
                labels = [ps.series.labels[t] for ps in members]
                sup = stacked_supervised_loss(
                    outputs,
                    labels,
                    table,
                    lam_reg=lam_reg,
                    class_rate_vec=weights.class_rates,
                    use_class_weights=weights.use_class_weights,
                )
                unsup = stacked_unsupervised_loss(batch, outputs, lam_c)
                sup_value += float(sup.value)
                unsup_value += float(unsup.value)
                total = ad.add(total, ad.add(sup, ad.mul(lam, unsup)))

            model.store.zero_grads()
            ad.backward(total)
            lr = learning_rate(step, steps, optimizer)
            grad_norm = ad.adam_step(
                model.store,
                lr=lr,
                weight_decay=optimizer.weight_decay,
                clip_norm=optimizer.clip_norm,
            )
        except NonFiniteValue as exc:
            raise NonFiniteValue(f"step {step}: {exc}") from exc

        entry = {
            "step": step,
            "loss": float(total.value),
            "supervised": sup_value,
            "unsupervised": unsup_value,
            "lam": lam,
            "lam_reg": lam_reg,
            "lam_c": lam_c,
            "lr": lr,
            "grad_norm": grad_norm,
        }
        if prepared_val and (step % val_every == val_every - 1 or step == steps - 1):
            val = validation_nll(model, prepared_val, table)
            entry["val_nll"] = val
            if val < best_val:
                best_val = val
                best_state = model.store.state_dict()
        history.append(entry)
        if log is not None:
            log(entry)

    if not prepared_val:
        best_state = model.store.state_dict()
        best_val = math.nan
    return TrainResult(
        best_state=best_state,
        final_state=model.store.state_dict(),
        best_val=best_val,
        history=history,
        m_c=m_c,
        m_v=m_v,
    )
