"""Command-line entry points: generate | label | train | evaluate | predict.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 I/O
failure.  The run directory comes from the config file or the
PREDFIX_RUN_DIR environment variable.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .config import ExperimentConfig, load_config
from .errors import ConfigError, IoFailure, IterationLimit, MissingLabels, NonFiniteValue
from .evaluate import evaluate, tune_gamma, write_metric_table, write_records
from .features import build_triplets
from .generators import generate, label_dataset
from .losses import class_rates
from .model import Model, ModelConfig, make_batch
from .oracle import ENUMERATION_CAP
from .selection import beta_moments, reduce_and_solve, score_and_select
from .seriesio import load_series, save_series
from .simplex import OPTIMAL
from .training import train


def _data_dir(config: ExperimentConfig) -> Path:
    return config.resolved_run_dir() / "data"


def cmd_generate(args) -> int:
    config = load_config(args.config)
    data_dir = _data_dir(config)
    data_dir.mkdir(parents=True, exist_ok=True)
    splits = generate(config.generator)
    for split, series_list in splits.items():
        path = data_dir / f"{split}.jsonl"
        save_series(path, series_list)
        print(f"wrote {sum(len(s) for s in series_list)} instances to {path}")
    return 0


def cmd_label(args) -> int:
    series_list = load_series(args.data)
    labeled = label_dataset(
        series_list,
        backend=args.backend,
        fraction=args.fraction,
        seed=args.seed,
        max_binaries=args.max_binaries,
    )
    out = args.out or args.data
    save_series(out, labeled)
    n = sum(s.n_labeled for s in labeled)
    print(f"labeled {n} instances -> {out}")
    return 0


def _checkpoint_paths(run_dir: Path):
    return run_dir / "checkpoint.ckpt", run_dir / "checkpoint.meta.json"


def cmd_train(args) -> int:
    config = load_config(args.config)
    run_dir = config.resolved_run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    data_dir = _data_dir(config)
    train_series = load_series(data_dir / "train.jsonl")
    val_path = data_dir / "val.jsonl"
    val_series = load_series(val_path) if val_path.exists() else []

    rates = None
    if config.use_class_weights:
        rates = class_rates(train_series)
    weights = config.loss_weights(class_rates=rates)
    model = Model(config.model)

    log_path = run_dir / "history.jsonl"
    with open(log_path, "w") as log_fh:

        def log(entry):
            log_fh.write(json.dumps(entry) + "\n")

        result = train(
            model,
            train_series,
            val_series,
            weights,
            config.optimizer,
            steps=config.training["steps"],
            batch_size=config.training["batch_size"],
            seed=config.seed,
            val_every=config.training["val_every"],
            quadrature_order=config.training["quadrature_order"],
            log=log,
        )

    ckpt_path, meta_path = _checkpoint_paths(run_dir)
    ad.save_checkpoint(ckpt_path, result.best_state)
    meta = {
        "model": config.model.to_dict(),
        "m_c": result.m_c,
        "m_v": result.m_v,
        "best_val_nll": result.best_val,
        "seed": config.seed,
    }
    meta_path.write_text(json.dumps(meta, indent=2))
    print(f"trained {config.training['steps']} steps; best val NLL {result.best_val:.6g}")
    print(f"checkpoint -> {ckpt_path}")
    return 0


def _load_model(checkpoint: Path):
    meta = json.loads(Path(checkpoint).with_suffix(".meta.json").read_text())
    model = Model(ModelConfig.from_dict(meta["model"]))
    model.store.load_state(ad.load_checkpoint(checkpoint))
    return model, meta


def cmd_evaluate(args) -> int:
    config = load_config(args.config)
    run_dir = config.resolved_run_dir()
    ckpt_path, _ = _checkpoint_paths(run_dir)
    checkpoint = Path(args.checkpoint) if args.checkpoint else ckpt_path
    model, meta = _load_model(checkpoint)
    data_dir = _data_dir(config)
    test_series = load_series(data_dir / "test.jsonl")
    rho_grid = config.evaluation["rho_grid"]
    backend = config.evaluation["backend"]

    gamma = args.gamma
    if gamma is None:
        val_series = load_series(data_dir / "val.jsonl")
        gamma = tune_gamma(
            val_series,
            model,
            meta["m_c"],
            meta["m_v"],
            rho=rho_grid[len(rho_grid) // 2],
            gamma_grid=config.evaluation["gamma_grid"],
            backend=backend,
        )
        print(f"tuned gamma = {gamma}")

    records, summary = evaluate(
        test_series, model, meta["m_c"], meta["m_v"], rho_grid, gamma, backend=backend
    )
    table_path = run_dir / "metrics.csv"
    records_path = run_dir / "records.jsonl"
    write_metric_table(table_path, summary)
    write_records(records_path, records)
    for row in summary:
        print(
            f"rho={row['rho']:.2f} acc={row['accuracy_mean']:.2f}% "
            f"infeas={row['infeasibility_mean']:.2f}% "
            f"gap={row['gap_rel_mean'] if row['gap_rel_mean'] is not None else float('nan'):.3f}%"
        )
    print(f"tables -> {table_path}, records -> {records_path}")
    return 0


def cmd_predict(args) -> int:
    model, meta = _load_model(Path(args.checkpoint))
    series_list = load_series(args.instance)
    series = series_list[0]
    inst = series.instances[args.index]
    batch = make_batch([inst], [build_triplets(inst, meta["m_c"], meta["m_v"])])
    outputs, _ = model.forward_batch(batch)
    alpha, beta = outputs[0].alpha_values, outputs[0].beta_values
    mu, sigma = beta_moments(alpha, beta)
    selection = score_and_select(mu, sigma, args.gamma, args.rho)
    payload = {
        "alpha": alpha.tolist(),
        "beta": beta.tolist(),
        "mu": mu.tolist(),
        "sigma": sigma.tolist(),
        "score": selection.scores.tolist(),
        "rho": args.rho,
        "gamma": args.gamma,
        "fixed_indices": selection.indices.tolist(),
        "fixed_values": selection.values.tolist(),
        "solution": None,
    }
    if inst.n_binary - selection.n_fixed <= ENUMERATION_CAP:
        report = reduce_and_solve(inst, selection)
        payload["solution"] = {
            "status": report.status,
            "assignment": None if report.assignment is None else report.assignment.tolist(),
            "objective": report.objective,
        }
    out = Path(args.out) if args.out else Path("prediction.json")
    out.write_text(json.dumps(payload, indent=2))
    print(f"prediction -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predfix",
        description="Predict-and-fix pipeline for temporal binary MILPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate train/val/test series files")
    p.add_argument("--config", "-c", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("label", help="attach exact labels to a series file")
    p.add_argument("data", help="series .jsonl file")
    p.add_argument("--out", default=None, help="output path (default: in place)")
    p.add_argument("--backend", default="oracle", choices=["oracle"])
    p.add_argument("--fraction", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-binaries", type=int, default=ENUMERATION_CAP)
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("train", help="train a model on generated data")
    p.add_argument("--config", "-c", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="tune gamma and compute test metrics")
    p.add_argument("--config", "-c", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--gamma", type=float, default=None, help="skip tuning")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("predict", help="score one instance and fix variables")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--instance", required=True, help="series .jsonl file")
    p.add_argument("--index", type=int, default=0, help="timestep within the file")
    p.add_argument("--rho", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_predict)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NonFiniteValue, IterationLimit) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (IoFailure, OSError) as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 4
    except MissingLabels as exc:
        print(f"missing labels: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
