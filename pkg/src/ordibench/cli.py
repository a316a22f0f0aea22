"""Benchmark CLI: generate data, train heads, score predictions, emit reports.

One TOML config file describes a run (dataset, nn, head, benchmark
sections); flags override the seed, output directory, job count, and level
count. Exit codes: 0 success, 1 internal failure (training divergence,
bugs), 2 user or config error.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .benchmark import run_benchmark, stable_hash
from .core import DomainError, OrdinalDataset, ParseError, TrainingError
from .data import (
    SyntheticSpec,
    generate,
    load_dataset,
    load_predictions,
    save_dataset_jsonl,
    split_dataset,
)
from .heads import BASELINE_KINDS, HeadKind, baseline_predict
from .metrics import (
    confusion_csv_text,
    confusion_matrix,
    evaluate,
    metric_rows,
    metrics_csv_text,
)
from .nn import TrainConfig
from .training import evaluate_model, fit, save_checkpoint

ALL_HEADS = [k.value for k in HeadKind]


def _load_config(path: str | None) -> dict:
    if path is None:
        raise DomainError("this command needs --config")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as err:
        raise ParseError(f"{path}: invalid TOML: {err}") from None


def _section(config: dict, name: str) -> dict:
    value = config.get(name, {})
    if not isinstance(value, dict):
        raise DomainError(f"config section [{name}] must be a table")
    return value


def _synthetic_spec(dataset: dict, seed_override: int | None) -> SyntheticSpec:
    required = ("levels",)
    for key in required:
        if key not in dataset:
            raise DomainError(f"[dataset] is missing {key!r}")
    return SyntheticSpec(
        num_samples=int(dataset.get("num_samples", 6000)),
        feature_dim=int(dataset.get("feature_dim", 16)),
        num_levels=int(dataset["levels"]),
        seed=int(seed_override if seed_override is not None else dataset.get("seed", 0)),
        weights=tuple(dataset["weights"]) if "weights" in dataset else None,
        thresholds=tuple(dataset["thresholds"]) if "thresholds" in dataset else None,
        proportions=tuple(dataset["proportions"]) if "proportions" in dataset else None,
        display_offset=int(dataset.get("display_offset", 0)),
    )


def _resolve_datasets(
    config: dict, seed_override: int | None = None, levels_override: int | None = None
) -> tuple[OrdinalDataset, OrdinalDataset | None, OrdinalDataset]:
    """Build (train, validation, test) from the [dataset] section."""
    dataset = _section(config, "dataset")
    kind = dataset.get("kind", "synthetic")
    if kind == "synthetic":
        spec = _synthetic_spec(dataset, seed_override)
        full = generate(spec)
        split = dataset.get("split", [0.7, 0.1, 0.2])
        if len(split) != 3:
            raise DomainError(f"[dataset] split must have 3 fractions, got {split}")
        train, val, test = split_dataset(full, split)
        if train is None or test is None:
            raise DomainError(f"split {split} leaves an empty train or test set")
        return train, val, test
    if kind == "files":
        fmt = dataset.get("format")
        levels = levels_override if levels_override is not None else dataset.get("levels")
        if "train" not in dataset or "test" not in dataset:
            raise DomainError("[dataset] kind='files' needs 'train' and 'test' paths")
        train = load_dataset(dataset["train"], fmt, levels)
        test = load_dataset(dataset["test"], fmt, levels if levels is not None else train.num_levels)
        val = None
        if "validation" in dataset:
            val = load_dataset(
                dataset["validation"], fmt, levels if levels is not None else train.num_levels
            )
        if test.num_levels != train.num_levels:
            raise DomainError(
                f"train has K={train.num_levels} but test has K={test.num_levels}"
            )
        return train, val, test
    raise DomainError(f"[dataset] kind must be 'synthetic' or 'files', got {kind!r}")


def _train_config(config: dict, seed: int | None) -> TrainConfig:
    nn = _section(config, "nn")
    return TrainConfig(
        epochs=int(nn.get("epochs", 25)),
        batch_size=int(nn.get("batch_size", 128)),
        base_lr=float(nn.get("base_lr", 1e-3)),
        seed=int(seed if seed is not None else nn.get("seed", 0)),
        hidden_sizes=tuple(nn.get("hidden_sizes", [64, 64])),
        validation_fraction=float(nn.get("validation_fraction", 0.1)),
        checkpoint_metric=str(nn.get("checkpoint_metric", "balanced_drps")),
    )


def _frequency_report(name: str, ds: OrdinalDataset) -> str:
    counts = np.bincount(ds.labels, minlength=ds.num_levels + 1)[1:]
    parts = [
        f"{level + 1 + ds.display_offset}:{count} ({100.0 * count / ds.num_samples:.1f}%)"
        for level, count in enumerate(counts)
    ]
    return f"{name}: N={ds.num_samples} " + " ".join(parts)


def cmd_generate(args) -> int:
    config = _load_config(args.config)
    dataset = _section(config, "dataset")
    spec = _synthetic_spec(dataset, args.seed)
    full = generate(spec)
    split = dataset.get("split", [0.7, 0.1, 0.2])
    train, val, test = split_dataset(full, split)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("validation", val), ("test", test)):
        if part is None:
            continue
        path = out_dir / f"{name}.jsonl"
        save_dataset_jsonl(part, path)
        print(_frequency_report(f"{name} -> {path}", part))
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    head_section = _section(config, "head")
    kind_name = args.head if args.head is not None else head_section.get("kind")
    if kind_name is None:
        raise DomainError("no head kind: set [head].kind or pass --head")
    try:
        kind = HeadKind(kind_name)
    except ValueError:
        raise DomainError(f"unknown head kind {kind_name!r}; choose from {ALL_HEADS}") from None

    train_ds, val_ds, test_ds = _resolve_datasets(config, levels_override=args.levels)
    train_cfg = _train_config(config, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if kind in BASELINE_KINDS:
        preds = baseline_predict(
            kind, train_ds.labels, test_ds.num_samples, train_cfg.seed, train_ds.num_levels
        )
        report = evaluate(None, preds, test_ds.labels, test_ds.num_levels)
    else:
        result = fit(
            kind, train_ds, train_cfg, val_ds=val_ds,
            isotonic_cdf=bool(head_section.get("isotonic_cdf", False)),
        )
        save_checkpoint(result.model, out_dir / f"checkpoint_{kind.value}_{train_cfg.seed}.json")
        report = evaluate_model(result.model, test_ds)

    text = report.to_kv_text()
    (out_dir / f"metrics_{kind.value}_{train_cfg.seed}.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_benchmark(args) -> int:
    config = _load_config(args.config)
    bench = _section(config, "benchmark")
    heads = bench.get("heads", ALL_HEADS)
    base_seed = int(args.seed if args.seed is not None else bench.get("base_seed", 1))
    num_seeds = int(bench.get("num_seeds", 5))
    seeds = bench.get("seeds", [base_seed + i for i in range(num_seeds)])

    train_ds, val_ds, test_ds = _resolve_datasets(config, levels_override=args.levels)
    train_cfg = _train_config(config, None)
    report = run_benchmark(
        heads,
        seeds,
        train_ds,
        test_ds,
        train_cfg,
        val_ds=val_ds,
        within=int(bench.get("adjacent_within", 1)),
        isotonic_cdf=bool(_section(config, "head").get("isotonic_cdf", False)),
        jobs=args.jobs,
        out_dir=args.out_dir,
        provenance={"config_hash": stable_hash(config)},
    )
    print(report.table_text(), end="")
    return 0


def cmd_evaluate(args) -> int:
    pset = load_predictions(args.predictions, args.levels)
    report = evaluate(list(pset.forecasts), pset.decoded, pset.truths, pset.num_levels)
    print(report.to_kv_text(), end="")
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "metrics.csv").write_text(metrics_csv_text(metric_rows([report])))
        (out_dir / "confusion.csv").write_text(confusion_csv_text(report.confusion_normalized))
    return 0


def cmd_confusion(args) -> int:
    pset = load_predictions(args.predictions, args.levels)
    counts, normalized, empty_rows = confusion_matrix(pset.decoded, pset.truths, pset.num_levels)
    print(confusion_csv_text(normalized), end="")
    if empty_rows:
        print(f"rows with no true samples: {','.join(str(r) for r in empty_rows)}", file=sys.stderr)
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "confusion_counts.csv").write_text(confusion_csv_text(counts))
        (out_dir / "confusion_normalized.csv").write_text(confusion_csv_text(normalized))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="override the config's seed")
    common.add_argument("--jobs", type=int, default=1, help="parallel (head, seed) runs")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--levels", type=int, help="override the level count K")

    parser = argparse.ArgumentParser(prog="ordibench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write synthetic dataset splits")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common], help="train one head for one seed")
    p.add_argument("--head", choices=ALL_HEADS, help="head kind (overrides [head].kind)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", parents=[common], help="train every head x seed and report")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("evaluate", parents=[common], help="score an external prediction file")
    p.add_argument("predictions", help="prediction JSONL file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("confusion", parents=[common], help="confusion matrices for a prediction file")
    p.add_argument("predictions", help="prediction JSONL file")
    p.set_defaults(func=cmd_confusion)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, ParseError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except TrainingError as err:
        print(f"training failed: {err}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
