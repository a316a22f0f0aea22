"""Multi-seed benchmark harness: train every head, aggregate, emit reports.

Each (head, seed) run is independent; results are assembled in config order
after a deterministic sort, so the emitted CSVs are byte-identical across
repeats of the same config regardless of job count. The text table is
rendered from the same rows the CSV is written from.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import DomainError, OrdinalDataset
from .heads import BASELINE_KINDS, HeadKind, baseline_predict
from .metrics import MetricReport, confusion_csv_text, evaluate, metric_rows
from .nn import TrainConfig
from .training import evaluate_model, fit, save_checkpoint

TABLE_COLUMNS = (
    ("balanced_drps", "Bal. DRPS"),
    ("balanced_drps_degenerate", "Bal. DRPS (degenerate)"),
    ("rmse", "RMSE"),
    ("accuracy", "Accuracy"),
)


@dataclass(frozen=True)
class HeadSummary:
    kind: HeadKind
    rows: tuple[tuple[str, float, float | None], ...]
    confusion: np.ndarray
    reports: tuple[MetricReport, ...]


@dataclass(frozen=True)
class RunReport:
    summaries: tuple[HeadSummary, ...]
    seeds: tuple[int, ...]
    provenance: dict

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["head", "metric", "mean", "std"])
        for summary in self.summaries:
            for name, mean, std in summary.rows:
                writer.writerow(
                    [summary.kind.value, name, f"{mean:.10g}", "" if std is None else f"{std:.10g}"]
                )
        return buf.getvalue()

    def table_text(self) -> str:
        header = ["Output type"] + [label for _, label in TABLE_COLUMNS]
        lines = [header]
        for summary in self.summaries:
            by_name = {name: (mean, std) for name, mean, std in summary.rows}
            cells = [summary.kind.value]
            for name, _ in TABLE_COLUMNS:
                mean, std = by_name[name]
                cells.append(f"{mean:.3f}" if std is None else f"{mean:.3f} ± {std:.3f}")
            lines.append(cells)
        widths = [max(len(row[c]) for row in lines) for c in range(len(header))]
        rendered = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in lines]
        rendered.insert(1, "-" * max(len(r) for r in rendered))
        return "\n".join(rendered) + "\n"


def dataset_fingerprint(*datasets: OrdinalDataset | None) -> str:
    digest = hashlib.sha256()
    for ds in datasets:
        if ds is None:
            digest.update(b"none")
            continue
        digest.update(str(ds.num_levels).encode())
        digest.update(np.ascontiguousarray(ds.features).tobytes())
        digest.update(np.ascontiguousarray(ds.labels).tobytes())
    return digest.hexdigest()


def stable_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def run_single(
    kind: HeadKind | str,
    seed: int,
    train_ds: OrdinalDataset,
    test_ds: OrdinalDataset,
    train_config: TrainConfig,
    val_ds: OrdinalDataset | None = None,
    within: int = 1,
    isotonic_cdf: bool = False,
    checkpoint_path: str | Path | None = None,
) -> MetricReport:
    """Train (or instantiate a baseline) for one seed and score the test split."""
    kind = HeadKind(kind)
    if kind in BASELINE_KINDS:
        preds = baseline_predict(kind, train_ds.labels, test_ds.num_samples, seed, train_ds.num_levels)
        return evaluate(None, preds, test_ds.labels, test_ds.num_levels, within)
    config = replace(train_config, seed=seed)
    result = fit(kind, train_ds, config, val_ds=val_ds, isotonic_cdf=isotonic_cdf)
    if checkpoint_path is not None:
        save_checkpoint(result.model, checkpoint_path)
    return evaluate_model(result.model, test_ds, within)


def _run_job(args) -> tuple[str, int, MetricReport]:
    kind, seed, train_ds, test_ds, train_config, val_ds, within, isotonic_cdf, ckpt = args
    report = run_single(
        kind, seed, train_ds, test_ds, train_config,
        val_ds=val_ds, within=within, isotonic_cdf=isotonic_cdf, checkpoint_path=ckpt,
    )
    return str(HeadKind(kind).value), seed, report


def run_benchmark(
    heads,
    seeds,
    train_ds: OrdinalDataset,
    test_ds: OrdinalDataset,
    train_config: TrainConfig,
    val_ds: OrdinalDataset | None = None,
    within: int = 1,
    isotonic_cdf: bool = False,
    jobs: int = 1,
    out_dir: str | Path | None = None,
    provenance: dict | None = None,
) -> RunReport:
    """Every head x seed, aggregated to mean +/- sample std, optionally written out."""
    kinds = [HeadKind(k) for k in heads]
    if len(set(kinds)) != len(kinds):
        raise DomainError("each head kind may appear only once per benchmark")
    seeds = tuple(int(s) for s in seeds)
    if not seeds or not kinds:
        raise DomainError("benchmark needs at least one head and one seed")

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    jobs_list = []
    for kind in kinds:
        for seed in seeds:
            ckpt = None
            if out_path is not None and kind not in BASELINE_KINDS:
                ckpt = out_path / f"checkpoint_{kind.value}_{seed}.json"
            jobs_list.append(
                (kind.value, seed, train_ds, test_ds, train_config, val_ds, within, isotonic_cdf, ckpt)
            )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_job, jobs_list))
    else:
        results = [_run_job(job) for job in jobs_list]
    by_key = {(kind, seed): report for kind, seed, report in results}

    summaries = []
    for kind in kinds:
        reports = tuple(by_key[(kind.value, seed)] for seed in sorted(seeds))
        confusion = np.mean([r.confusion_normalized for r in reports], axis=0)
        summaries.append(
            HeadSummary(kind, tuple(metric_rows(reports)), confusion, reports)
        )

    full_provenance = dict(provenance or {})
    full_provenance["seeds"] = list(seeds)
    full_provenance["dataset_fingerprint"] = dataset_fingerprint(train_ds, val_ds, test_ds)
    report = RunReport(tuple(summaries), seeds, full_provenance)

    if out_path is not None:
        write_report_files(report, out_path, display_offset=test_ds.display_offset)
    return report


def write_report_files(report: RunReport, out_dir: str | Path, display_offset: int = 0) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report.csv_text())
    (out_dir / "report.txt").write_text(report.table_text())
    (out_dir / "provenance.json").write_text(
        json.dumps(report.provenance, sort_keys=True, indent=2) + "\n"
    )
    for summary in report.summaries:
        text = confusion_csv_text(summary.confusion, display_offset)
        (out_dir / f"confusion_{summary.kind.value}.csv").write_text(text)
