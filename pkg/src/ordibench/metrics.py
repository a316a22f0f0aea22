"""Scoring rules and classical metrics for ordinal predictions.

The ranked probability score for K discrete levels compares the forecast
CDF against the truth's step CDF at the K-1 interior thresholds:

    score(F, y) = sum_{k=1}^{K-1} (F_k - 1{k >= y})^2

averaged over samples. For a degenerate (one-hot) forecast this reduces to
the absolute rank error, so hard-label predictors and probabilistic ones
share one scale. The balanced variant macro-averages per-sample scores so
every class present in the evaluation set contributes equally regardless
of prevalence; classes absent from the evaluation set are excluded and
flagged.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    CategoricalForecast,
    CumulativeForecast,
    DomainError,
    as_rank_indices,
)

SCALAR_METRICS = (
    "drps",
    "balanced_drps",
    "drps_degenerate",
    "balanced_drps_degenerate",
    "rmse",
    "accuracy",
    "adjacent_accuracy",
)


def forecast_cdf_matrix(
    forecasts: Sequence[CategoricalForecast | CumulativeForecast], num_levels: int
) -> np.ndarray:
    """Stack forecasts into an (N, K-1) matrix of cumulative values.

    Categorical forecasts are converted by partial summation; cumulative
    forecasts are taken verbatim (possibly non-monotone). A forecast whose
    level count disagrees with num_levels is a domain error.
    """
    if len(forecasts) == 0:
        raise DomainError("expected at least one forecast")
    cdf = np.empty((len(forecasts), num_levels - 1))
    for i, f in enumerate(forecasts):
        if f.num_levels != num_levels:
            raise DomainError(f"forecast {i} has K={f.num_levels}, expected K={num_levels}")
        if isinstance(f, CategoricalForecast):
            cdf[i] = np.cumsum(f.probs)[:-1]
        elif isinstance(f, CumulativeForecast):
            cdf[i] = f.cdf
        else:
            raise DomainError(f"unsupported forecast type {type(f).__name__}")
    return cdf


def degenerate_cdf_matrix(labels: np.ndarray, num_levels: int) -> np.ndarray:
    """Step-function CDF rows for hard labels: F_k = 1{k >= y}."""
    idx = as_rank_indices(labels, num_levels)
    return (np.arange(1, num_levels)[None, :] >= idx[:, None]).astype(np.float64)


def per_sample_drps(cdf: np.ndarray, labels, num_levels: int) -> np.ndarray:
    """Squared CDF distance to the truth's step function, one value per sample."""
    idx = as_rank_indices(labels, num_levels)
    if cdf.shape != (idx.size, num_levels - 1):
        raise DomainError(f"cdf shape {cdf.shape} does not match {idx.size} labels at K={num_levels}")
    step = np.arange(1, num_levels)[None, :] >= idx[:, None]
    return np.sum((cdf - step) ** 2, axis=1)


def _resolve_inputs(forecasts, labels) -> tuple[np.ndarray, np.ndarray, int]:
    if len(forecasts) != len(labels):
        raise DomainError(f"{len(forecasts)} forecasts for {len(labels)} labels")
    if len(forecasts) == 0:
        raise DomainError("expected at least one forecast")
    num_levels = forecasts[0].num_levels
    cdf = forecast_cdf_matrix(forecasts, num_levels)
    idx = as_rank_indices(labels, num_levels)
    return cdf, idx, num_levels


def drps(forecasts: Sequence[CategoricalForecast | CumulativeForecast], labels) -> float:
    """Mean ranked probability score over the evaluation set."""
    cdf, idx, num_levels = _resolve_inputs(forecasts, labels)
    return float(np.mean(per_sample_drps(cdf, idx, num_levels)))


def balanced_drps(forecasts: Sequence[CategoricalForecast | CumulativeForecast], labels) -> float:
    """Macro-averaged ranked probability score: per-class means averaged over present classes."""
    cdf, idx, num_levels = _resolve_inputs(forecasts, labels)
    return balanced_mean(per_sample_drps(cdf, idx, num_levels), idx)


def balanced_mean(values: np.ndarray, label_indices: np.ndarray) -> float:
    """Average per-class means of `values`, classes taken from the labels present."""
    classes = np.unique(label_indices)
    class_means = [float(np.mean(values[label_indices == c])) for c in classes]
    return float(np.mean(class_means))


@dataclass(frozen=True)
class ClassWeights:
    """Per-class weights making every present class contribute equally.

    weight[c] = 1 / (count[c] * n_present), so weight[c] * count[c] is the
    same constant for every present class and the weighted sum of per-sample
    scores equals the macro average.
    """

    weights: dict[int, float]

    @classmethod
    def from_labels(cls, labels, num_levels: int) -> "ClassWeights":
        idx = as_rank_indices(labels, num_levels)
        classes, counts = np.unique(idx, return_counts=True)
        n_present = classes.size
        return cls({int(c): 1.0 / (int(n) * n_present) for c, n in zip(classes, counts)})

    def per_sample(self, labels, num_levels: int) -> np.ndarray:
        idx = as_rank_indices(labels, num_levels)
        missing = set(int(c) for c in np.unique(idx)) - set(self.weights)
        if missing:
            raise DomainError(f"no weight defined for class {sorted(missing)[0]}")
        return np.asarray([self.weights[int(c)] for c in idx])


def rmse(predictions, labels, num_levels: int | None = None) -> float:
    """Root mean squared rank-index error."""
    pred, idx = _paired_indices(predictions, labels, num_levels)
    return float(np.sqrt(np.mean((pred - idx) ** 2.0)))


def accuracy(predictions, labels, num_levels: int | None = None) -> float:
    """Fraction of exact rank matches."""
    pred, idx = _paired_indices(predictions, labels, num_levels)
    return float(np.mean(pred == idx))


def adjacent_accuracy(predictions, labels, within: int = 1, num_levels: int | None = None) -> float:
    """Fraction of predictions within `within` levels of the truth."""
    if within < 0:
        raise DomainError(f"within must be >= 0, got {within}")
    pred, idx = _paired_indices(predictions, labels, num_levels)
    return float(np.mean(np.abs(pred - idx) <= within))


def _paired_indices(predictions, labels, num_levels: int | None) -> tuple[np.ndarray, np.ndarray]:
    if len(predictions) != len(labels):
        raise DomainError(f"{len(predictions)} predictions for {len(labels)} labels")
    # range validation needs a K; without one, only pairing and positivity are checked
    bound = num_levels if num_levels is not None else np.iinfo(np.int64).max - 1
    pred = as_rank_indices(predictions, bound)
    idx = as_rank_indices(labels, bound)
    return pred, idx


def confusion_matrix(
    predictions, labels, num_levels: int
) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Counts[t][p] plus the row-normalized matrix.

    Rows are true classes, columns predictions. Rows with no true samples
    normalize to zeros and their 1-based ranks are returned as a flag tuple.
    """
    pred, idx = _paired_indices(predictions, labels, num_levels)
    counts = np.zeros((num_levels, num_levels), dtype=np.int64)
    np.add.at(counts, (idx - 1, pred - 1), 1)
    row_sums = counts.sum(axis=1)
    normalized = np.zeros((num_levels, num_levels))
    nonzero = row_sums > 0
    normalized[nonzero] = counts[nonzero] / row_sums[nonzero, None]
    empty_rows = tuple(int(r + 1) for r in np.flatnonzero(~nonzero))
    return counts, normalized, empty_rows


@dataclass(frozen=True)
class MetricReport:
    """Every scalar metric plus confusion matrices for one evaluation run."""

    num_levels: int
    num_samples: int
    drps: float
    balanced_drps: float
    drps_degenerate: float
    balanced_drps_degenerate: float
    rmse: float
    accuracy: float
    adjacent_accuracy: float
    adjacent_within: int
    confusion_counts: np.ndarray
    confusion_normalized: np.ndarray
    absent_classes: tuple[int, ...]

    def scalars(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in SCALAR_METRICS}

    def to_kv_text(self) -> str:
        lines = [f"num_levels {self.num_levels}", f"num_samples {self.num_samples}"]
        lines += [f"{name} {value:.10g}" for name, value in self.scalars().items()]
        lines.append(f"adjacent_within {self.adjacent_within}")
        if self.absent_classes:
            lines.append("absent_classes " + ",".join(str(c) for c in self.absent_classes))
        return "\n".join(lines) + "\n"


def evaluate(
    forecasts: Sequence[CategoricalForecast | CumulativeForecast] | None,
    decoded,
    labels,
    num_levels: int,
    within: int = 1,
) -> MetricReport:
    """Full metric suite for one set of predictions.

    `decoded` are the hard labels each forecast decodes to; they drive RMSE,
    accuracy, the confusion matrix, and the degenerate scoring-rule variants
    (which rebuild every forecast as one-hot at its decoded level). Passing
    forecasts=None scores a label-only predictor: the probabilistic columns
    then equal the degenerate ones.
    """
    idx = as_rank_indices(labels, num_levels)
    dec = as_rank_indices(decoded, num_levels)
    if dec.size != idx.size:
        raise DomainError(f"{dec.size} decoded labels for {idx.size} truths")

    degenerate_cdf = degenerate_cdf_matrix(dec, num_levels)
    if forecasts is None:
        prob_cdf = degenerate_cdf
    else:
        if len(forecasts) != idx.size:
            raise DomainError(f"{len(forecasts)} forecasts for {idx.size} labels")
        prob_cdf = forecast_cdf_matrix(forecasts, num_levels)

    prob_scores = per_sample_drps(prob_cdf, idx, num_levels)
    degen_scores = per_sample_drps(degenerate_cdf, idx, num_levels)
    counts, normalized, empty_rows = confusion_matrix(dec, idx, num_levels)

    return MetricReport(
        num_levels=num_levels,
        num_samples=int(idx.size),
        drps=float(np.mean(prob_scores)),
        balanced_drps=balanced_mean(prob_scores, idx),
        drps_degenerate=float(np.mean(degen_scores)),
        balanced_drps_degenerate=balanced_mean(degen_scores, idx),
        rmse=rmse(dec, idx, num_levels),
        accuracy=accuracy(dec, idx, num_levels),
        adjacent_accuracy=adjacent_accuracy(dec, idx, within, num_levels),
        adjacent_within=within,
        confusion_counts=counts,
        confusion_normalized=normalized,
        absent_classes=empty_rows,
    )


def metric_rows(reports: Sequence[MetricReport]) -> list[tuple[str, float, float | None]]:
    """(metric, mean, sample std) rows across runs; std is None for a single run."""
    if not reports:
        raise DomainError("expected at least one report")
    rows = []
    for name in SCALAR_METRICS:
        values = np.asarray([r.scalars()[name] for r in reports])
        std = float(np.std(values, ddof=1)) if values.size >= 2 else None
        rows.append((name, float(np.mean(values)), std))
    return rows


def metrics_csv_text(rows: Sequence[tuple[str, float, float | None]]) -> str:
    """CSV rendering of (metric, mean, std) rows; std column empty when omitted."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "mean", "std"])
    for name, mean, std in rows:
        writer.writerow([name, f"{mean:.10g}", "" if std is None else f"{std:.10g}"])
    return buf.getvalue()


def confusion_csv_text(matrix: np.ndarray, display_offset: int = 0) -> str:
    """CSV with a leading true/pred header row and column of (display) rank indices."""
    num_levels = matrix.shape[0]
    ranks = [str(k + 1 + display_offset) for k in range(num_levels)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["true\\pred"] + ranks)
    floats = np.issubdtype(matrix.dtype, np.floating)
    for r in range(num_levels):
        cells = [f"{v:.10g}" if floats else str(int(v)) for v in matrix[r]]
        writer.writerow([ranks[r]] + cells)
    return buf.getvalue()
