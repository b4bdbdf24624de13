"""Command-line entry point: train, eval, bench, decompose, inspect.

Exit codes: 0 on success, 1 on runtime failures, 2 on usage or
configuration errors.  Summaries are fixed-order ``key: value`` lines;
epoch traces are tab-separated with a header row.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .checkpoint import (
    CheckpointError,
    load_checkpoint,
    load_tensor,
    save_checkpoint,
    save_tt,
)
from .config import (
    ConfigError,
    RunConfig,
    build_dataset,
    load_run_config,
    model_for_variant,
)
from .data import CsvFormatError, CsvSchemaError
from .models import ModelConfig, param_count, param_shapes
from .tensor import from_array
from .training import TrainingDiverged, evaluate, train
from .tt import dense_param_count, tt_param_count, tt_reconstruct, tt_svd

__all__ = ["main"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_lines(path: str, pairs: list[tuple[str, object]]) -> None:
    with open(path, "w") as fh:
        for key, value in pairs:
            fh.write(f"{key}: {_fmt(value)}\n")


def _print_pairs(pairs: list[tuple[str, object]]) -> None:
    for key, value in pairs:
        print(f"{key}: {_fmt(value)}")


def _write_trace(path: str, trace: list[dict]) -> None:
    with open(path, "w") as fh:
        fh.write("epoch\ttrain_loss\tval_loss\n")
        for row in trace:
            fh.write(f"{row['epoch']}\t{row['train_loss']!r}\t{row['val_loss']!r}\n")


def _metric_pair(metrics: dict) -> tuple[str, float]:
    if "mae" in metrics:
        return "test_mae", metrics["mae"]
    return "test_accuracy", metrics["accuracy"]


def _summary_pairs(run: RunConfig, model: ModelConfig, metrics: dict, wall: float) -> list:
    key, value = _metric_pair(metrics)
    return [
        ("variant", model.variant),
        ("task", model.task),
        (key, value),
        ("parameter_count", metrics["parameter_count"]),
        ("epochs", run.training.epochs),
        ("train_seed", run.training.seed),
        ("data_seed", int(run.data.get("seed", 0))),
        ("wall_time_s", wall),
    ]


def _train_one(run: RunConfig, model: ModelConfig, dataset):
    started = time.perf_counter()
    store, trace = train(model, dataset, run.training)
    wall = time.perf_counter() - started
    metrics = evaluate(model, store.values(), dataset, split="test")
    return store, trace, metrics, wall


def _snapshot(run: RunConfig, model: ModelConfig) -> dict:
    raw = dict(run.raw)
    raw["model"] = dict(raw.get("model", {}))
    raw["model"]["variant"] = model.variant
    raw["training"] = dict(raw.get("training", {}))
    raw["training"]["seed"] = run.training.seed
    return raw


def cmd_train(args) -> int:
    run = load_run_config(args.config, seed_override=args.seed)
    out_dir = args.out or run.output_dir
    os.makedirs(out_dir, exist_ok=True)
    dataset = build_dataset(run)
    store, trace, metrics, wall = _train_one(run, run.model, dataset)
    pairs = _summary_pairs(run, run.model, metrics, wall)
    _write_trace(os.path.join(out_dir, "trace.tsv"), trace)
    _write_lines(os.path.join(out_dir, "summary.txt"), pairs)
    save_checkpoint(
        os.path.join(out_dir, "checkpoint.rgtn"),
        store.values(),
        {"kind": "model", "config": _snapshot(run, run.model)},
    )
    _print_pairs(pairs)
    return 0


def cmd_eval(args) -> int:
    arrays, meta = load_checkpoint(args.checkpoint)
    if meta.get("kind") != "model":
        raise CheckpointError(f"{args.checkpoint}: not a model checkpoint")
    if args.config:
        run = load_run_config(args.config, seed_override=args.seed)
    else:
        run = _run_from_snapshot(meta["config"], args.seed)
    expected = param_shapes(run.model)
    for name, shape in expected.items():
        if name not in arrays:
            raise ValueError(f"checkpoint lacks parameter {name!r} required by the model")
        if tuple(arrays[name].shape) != shape:
            raise ValueError(
                f"parameter {name!r}: checkpoint shape {tuple(arrays[name].shape)} "
                f"does not match model shape {shape}"
            )
    dataset = build_dataset(run)
    metrics = evaluate(run.model, arrays, dataset, split="test")
    key, value = _metric_pair(metrics)
    pairs = [
        ("variant", run.model.variant),
        ("task", run.model.task),
        (key, value),
        ("parameter_count", metrics["parameter_count"]),
        ("n_samples", metrics["n_samples"]),
        ("wall_time_s", metrics["wall_time_s"]),
    ]
    _print_pairs(pairs)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_lines(os.path.join(args.out, "eval.txt"), pairs)
    return 0


def _run_from_snapshot(snapshot: dict, seed_override: int | None) -> RunConfig:
    import tempfile

    import yaml

    with tempfile.NamedTemporaryFile("w", suffix=".yaml", delete=False) as fh:
        yaml.safe_dump(snapshot, fh)
        path = fh.name
    try:
        return load_run_config(path, seed_override=seed_override)
    finally:
        os.unlink(path)


def cmd_bench(args) -> int:
    run = load_run_config(args.config, seed_override=args.seed)
    if run.bench_variants is None:
        raise ConfigError("bench: config needs a bench.variants list (>= 2 variants)")
    out_dir = args.out or run.output_dir
    os.makedirs(out_dir, exist_ok=True)
    dataset = build_dataset(run)
    rows = []
    for variant in run.bench_variants:
        model = model_for_variant(run, variant)
        store, trace, metrics, wall = _train_one(run, model, dataset)
        key, value = _metric_pair(metrics)
        rows.append((variant, value, metrics["parameter_count"], wall))
        _write_trace(os.path.join(out_dir, f"trace_{variant}.tsv"), trace)
        save_checkpoint(
            os.path.join(out_dir, f"checkpoint_{variant}.rgtn"),
            store.values(),
            {"kind": "model", "config": _snapshot(run, model)},
        )
    metric_name = "test_mae" if run.model.task == "regression" else "test_accuracy"
    header = f"{'variant':<10} {metric_name:>14} {'parameters':>12} {'wall_time_s':>12}"
    lines = [header]
    for variant, value, params, wall in rows:
        lines.append(f"{variant:<10} {value:>14.6g} {params:>12d} {wall:>12.3f}")
    table = "\n".join(lines)
    print(table)
    with open(os.path.join(out_dir, "bench.txt"), "w") as fh:
        fh.write(table + "\n")
    return 0


def cmd_decompose(args) -> int:
    if args.max_ranks is None and args.tol is None:
        raise ConfigError("decompose: provide --max-ranks and/or --tol")
    array = load_tensor(args.tensor)
    caps = None
    if args.max_ranks:
        parsed = [int(r) for r in args.max_ranks.split(",")]
        caps = parsed[0] if len(parsed) == 1 else parsed
    tt = tt_svd(from_array(array), max_ranks=caps, rel_tolerance=args.tol)
    recon = tt_reconstruct(tt).array
    denom = np.linalg.norm(array)
    error = float(np.linalg.norm(recon - array) / denom) if denom > 0 else 0.0
    tt_params = tt_param_count(tt)
    dense_params = dense_param_count(array.shape)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    cores_path = os.path.join(out_dir, "cores.rgtn")
    save_tt(
        cores_path,
        [core.array for core in tt.cores],
        {"ranks": list(tt.ranks), "mode_sizes": list(tt.mode_sizes)},
    )
    pairs = [
        ("mode_sizes", ",".join(str(d) for d in tt.mode_sizes)),
        ("ranks", ",".join(str(r) for r in tt.ranks)),
        ("tt_parameters", tt_params),
        ("dense_parameters", dense_params),
        ("compression_ratio", dense_params / tt_params),
        ("reconstruction_error", error),
        ("cores_file", cores_path),
    ]
    _print_pairs(pairs)
    _write_lines(os.path.join(out_dir, "decompose.txt"), pairs)
    return 0


def cmd_inspect(args) -> int:
    arrays, meta = load_checkpoint(args.checkpoint)
    print(f"format_version: {meta['format_version']}")
    print(f"kind: {meta.get('kind', 'unknown')}")
    if meta.get("kind") == "model":
        model_raw = meta.get("config", {}).get("model", {})
        for key in ("variant", "task", "tau", "d_phys", "d_feat", "hidden", "out_dim"):
            if key in model_raw:
                print(f"{key}: {model_raw[key]}")
    total = 0
    tt_ranks: list[int] = []
    for name, arr in arrays.items():
        print(f"param {name}: shape={tuple(arr.shape)} count={arr.size}")
        total += arr.size
        if name.startswith("head.core"):
            tt_ranks.append(arr.shape[0])
    if tt_ranks:
        last = arrays[f"head.core{len(tt_ranks) - 1}"].shape[-1]
        print(f"head_tt_ranks: {tuple(tt_ranks) + (last,)}")
    print(f"total_parameters: {total}")
    if "w_r" in arrays:
        w_r = arrays["w_r"]
        residual = float(np.linalg.norm(w_r @ w_r - w_r))
        print(f"w_r_idempotency_residual: {residual!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rgtn",
        description="Recurrent graph tensor network toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a config file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", default=None)
    p_train.add_argument("--seed", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", default=None)
    p_eval.add_argument("--out", default=None)
    p_eval.add_argument("--seed", type=int, default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="train and compare several variants")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--out", default=None)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.set_defaults(func=cmd_bench)

    p_dec = sub.add_parser("decompose", help="tensor-train decompose a tensor file")
    p_dec.add_argument("--tensor", required=True)
    p_dec.add_argument("--max-ranks", default=None)
    p_dec.add_argument("--tol", type=float, default=None)
    p_dec.add_argument("--out", default=None)
    p_dec.set_defaults(func=cmd_decompose)

    p_ins = sub.add_parser("inspect", help="describe a checkpoint")
    p_ins.add_argument("--checkpoint", required=True)
    p_ins.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CsvSchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"error: {exc} ({len(exc.trace)} epochs recorded)", file=sys.stderr)
        return 1
    except (CheckpointError, CsvFormatError, FloatingPointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
