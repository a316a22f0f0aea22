"""Synthetic ordinal data and dataset/prediction file ingestion.

The generator inverts the latent-utility story: draw standard-normal
features, add standardized logistic noise to a linear score, and censor the
result against strictly increasing thresholds. Class imbalance is induced
by placing the thresholds at empirical quantiles of the latent sample
instead of fixed values, which hits target proportions to within sampling
noise in O(N).

File formats:
  dataset JSONL    one object per line, fields "features" and "label";
                   optional leading metadata line {"levels": K, "display_offset": o}
  dataset CSV      header f1..fd,label
  prediction JSONL fields "probs" (length K) xor "label", plus "truth"
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    CategoricalForecast,
    CumulativeForecast,
    DomainError,
    OrdinalDataset,
    ParseError,
    degenerate_forecast,
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Ground-truth ordered-logit process for dataset generation.

    Exactly one of `thresholds` (explicit cut points, strictly increasing,
    K-1 of them) and `proportions` (target class shares, K of them) must be
    given. weights=None draws them from N(0,1) using the seed.
    """

    num_samples: int
    feature_dim: int
    num_levels: int
    seed: int
    weights: tuple[float, ...] | None = None
    thresholds: tuple[float, ...] | None = None
    proportions: tuple[float, ...] | None = None
    display_offset: int = 0

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise DomainError(f"num_samples must be >= 1, got {self.num_samples}")
        if self.feature_dim < 1:
            raise DomainError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.num_levels < 2:
            raise DomainError(f"num_levels must be >= 2, got {self.num_levels}")
        if (self.thresholds is None) == (self.proportions is None):
            raise DomainError("give exactly one of thresholds and proportions")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
            if len(self.weights) != self.feature_dim:
                raise DomainError(f"{len(self.weights)} weights for feature_dim={self.feature_dim}")
        if self.thresholds is not None:
            object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
            if len(self.thresholds) != self.num_levels - 1:
                raise DomainError(
                    f"expected {self.num_levels - 1} thresholds for K={self.num_levels}, "
                    f"got {len(self.thresholds)}"
                )
            if np.any(np.diff(self.thresholds) <= 0):
                raise DomainError("thresholds must be strictly increasing")
        if self.proportions is not None:
            object.__setattr__(self, "proportions", tuple(float(p) for p in self.proportions))
            if len(self.proportions) != self.num_levels:
                raise DomainError(
                    f"expected {self.num_levels} proportions, got {len(self.proportions)}"
                )
            if any(p <= 0 for p in self.proportions):
                raise DomainError("proportions must be positive")
            if abs(sum(self.proportions) - 1.0) > 1e-9:
                raise DomainError(f"proportions sum to {sum(self.proportions):.12g}, expected 1")


def generate(spec: SyntheticSpec) -> OrdinalDataset:
    """Draw a dataset from the spec's latent process, deterministically per seed."""
    rng = np.random.default_rng(spec.seed)
    if spec.weights is None:
        weights = rng.standard_normal(spec.feature_dim)
    else:
        weights = np.asarray(spec.weights)
    features = rng.standard_normal((spec.num_samples, spec.feature_dim))
    noise = rng.logistic(loc=0.0, scale=1.0, size=spec.num_samples)
    latent = features @ weights + noise

    if spec.proportions is not None:
        cut_points = np.quantile(latent, np.cumsum(spec.proportions)[:-1])
    else:
        cut_points = np.asarray(spec.thresholds)
    labels = 1 + np.searchsorted(cut_points, latent, side="left")
    # quantile placement can starve a class at tiny N; the dataset invariant catches K drift
    return OrdinalDataset(features, labels, spec.num_levels, spec.display_offset)


def true_weights(spec: SyntheticSpec) -> np.ndarray:
    """The weights generate() actually used (materializes the seeded draw)."""
    if spec.weights is not None:
        return np.asarray(spec.weights)
    return np.random.default_rng(spec.seed).standard_normal(spec.feature_dim)


def split_dataset(ds: OrdinalDataset, fractions: Sequence[float]) -> tuple[OrdinalDataset | None, ...]:
    """Partition rows into consecutive blocks sized by rounded fractions.

    The final block absorbs rounding; a zero-sized middle block yields None.
    """
    fractions = [float(f) for f in fractions]
    if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DomainError(f"split fractions must be nonnegative and sum to 1, got {fractions}")
    counts = [int(round(f * ds.num_samples)) for f in fractions[:-1]]
    counts.append(ds.num_samples - sum(counts))
    if counts[-1] < 0:
        raise DomainError(f"split fractions {fractions} overflow {ds.num_samples} samples")
    parts: list[OrdinalDataset | None] = []
    start = 0
    for count in counts:
        parts.append(ds.take(np.arange(start, start + count)) if count > 0 else None)
        start += count
    return tuple(parts)


# ---------------------------------------------------------------------------
# Dataset files


def save_dataset_jsonl(ds: OrdinalDataset, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps({"levels": ds.num_levels, "display_offset": ds.display_offset}) + "\n")
        for row, label in zip(ds.features, ds.labels):
            fh.write(json.dumps({"features": row.tolist(), "label": int(label)}) + "\n")


def save_dataset_csv(ds: OrdinalDataset, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"f{i + 1}" for i in range(ds.feature_dim)] + ["label"])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(v) for v in row] + [int(label)])


def load_dataset(
    path: str | Path, fmt: str | None = None, levels: int | None = None
) -> OrdinalDataset:
    """Read a dataset file; `fmt` defaults from the suffix (.jsonl or .csv).

    The level count comes from the explicit argument first, then (for JSONL)
    the metadata line; a file carrying neither is rejected rather than
    silently inferring K from the labels seen.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt == "jsonl":
        return _load_jsonl(path, levels)
    if fmt == "csv":
        return _load_csv(path, levels)
    raise DomainError(f"unsupported dataset format {fmt!r} for {path}")


def _finite_floats(values, path: Path, lineno: int, what: str) -> list[float]:
    if not isinstance(values, list) or not values:
        raise ParseError(f"{path}:{lineno}: {what} must be a non-empty array")
    out = []
    for v in values:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ParseError(f"{path}:{lineno}: non-finite or non-numeric value {v!r} in {what}")
        out.append(float(v))
    return out


def _check_label(value, path: Path, lineno: int, levels: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ParseError(f"{path}:{lineno}: label must be an integer, got {value!r}")
    if not 1 <= value <= levels:
        raise ParseError(f"{path}:{lineno}: label {value} outside {{1..{levels}}}")
    return value


def _load_jsonl(path: Path, levels: int | None) -> OrdinalDataset:
    features: list[list[float]] = []
    labels: list[int] = []
    display_offset = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {err.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            if "features" not in obj:
                if lineno == 1 and "levels" in obj:
                    meta_levels = obj["levels"]
                    if not isinstance(meta_levels, int) or meta_levels < 2:
                        raise ParseError(f"{path}:1: metadata levels must be an integer >= 2")
                    if levels is None:
                        levels = meta_levels
                    display_offset = int(obj.get("display_offset", 0))
                    continue
                raise ParseError(f"{path}:{lineno}: row is missing 'features'")
            if "label" not in obj:
                raise ParseError(f"{path}:{lineno}: row is missing 'label'")
            if levels is None:
                raise ParseError(
                    f"{path}: no level count: add a metadata line or pass --levels"
                )
            features.append(_finite_floats(obj["features"], path, lineno, "features"))
            labels.append(_check_label(obj["label"], path, lineno, levels))
    return _assemble(features, labels, levels, display_offset, path)


def _load_csv(path: Path, levels: int | None) -> OrdinalDataset:
    if levels is None:
        raise ParseError(f"{path}: CSV datasets carry no level count; pass --levels")
    features: list[list[float]] = []
    labels: list[int] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label":
            raise ParseError(f"{path}:1: expected header f1..fd,label")
        width = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if len(row) != width + 1:
                raise ParseError(f"{path}:{lineno}: expected {width + 1} columns, got {len(row)}")
            try:
                values = [float(cell) for cell in row[:-1]]
                label = int(row[-1])
            except ValueError as err:
                raise ParseError(f"{path}:{lineno}: {err}") from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(f"{path}:{lineno}: non-finite feature value")
            features.append(values)
            labels.append(_check_label(label, path, lineno, levels))
    return _assemble(features, labels, levels, 0, path)


def _assemble(features, labels, levels, display_offset, path) -> OrdinalDataset:
    if not features:
        raise ParseError(f"{path}: no data rows")
    widths = {len(row) for row in features}
    if len(widths) != 1:
        raise ParseError(f"{path}: inconsistent feature widths {sorted(widths)}")
    return OrdinalDataset(np.asarray(features), np.asarray(labels), levels, display_offset)


# ---------------------------------------------------------------------------
# Prediction files


@dataclass(frozen=True)
class PredictionSet:
    """Parsed prediction records, ready for the metric suite."""

    forecasts: tuple[CategoricalForecast | CumulativeForecast, ...]
    decoded: np.ndarray
    truths: np.ndarray
    num_levels: int


def load_predictions(path: str | Path, levels: int | None = None) -> PredictionSet:
    """Parse a prediction JSONL file.

    Probabilistic records decode by argmax (ties to the lowest rank);
    label-only records become degenerate forecasts. All records must share
    one level count, taken from `levels` or the first probs record.
    """
    path = Path(path)
    forecasts: list[CategoricalForecast] = []
    decoded: list[int] = []
    truths: list[int] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as err:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {err.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(f"{path}:{lineno}: expected a JSON object")
            has_probs, has_label = "probs" in obj, "label" in obj
            if has_probs == has_label:
                raise ParseError(f"{path}:{lineno}: record needs exactly one of 'probs' and 'label'")
            if "truth" not in obj:
                raise ParseError(f"{path}:{lineno}: record is missing 'truth'")

            if has_probs:
                probs = _finite_floats(obj["probs"], path, lineno, "probs")
                if levels is None:
                    levels = len(probs)
                if len(probs) != levels:
                    raise ParseError(
                        f"{path}:{lineno}: probs has length {len(probs)}, expected K={levels}"
                    )
                try:
                    forecast = CategoricalForecast(np.asarray(probs))
                except DomainError as err:
                    raise ParseError(f"{path}:{lineno}: {err}") from None
                forecasts.append(forecast)
                decoded.append(int(np.argmax(forecast.probs)) + 1)
            else:
                if levels is None:
                    raise ParseError(
                        f"{path}:{lineno}: label-only records need --levels or a preceding probs record"
                    )
                label = _check_label(obj["label"], path, lineno, levels)
                forecasts.append(degenerate_forecast(label, levels))
                decoded.append(label)
            truths.append(_check_label(obj["truth"], path, lineno, levels))
    if not truths:
        raise ParseError(f"{path}: no prediction records")
    return PredictionSet(tuple(forecasts), np.asarray(decoded), np.asarray(truths), levels)
