"""Domain types for discrete-level ordinal prediction.

Ranks are 1-based everywhere: a label is an integer in {1..K} where K is the
number of ordered levels carried explicitly by datasets and forecasts. An
optional display offset maps internal rank 1 to whatever the source data
calls its lowest level (e.g. offset +2 prints rank 1 as "grade 3").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DomainError(ValueError):
    """Invalid value for the declared ordinal domain (rank out of range, bad shape, ...)."""


class TrainingError(RuntimeError):
    """Non-finite loss or gradient during optimization; message carries epoch/batch context."""


class ParseError(ValueError):
    """Malformed input file; message carries the path and line number."""


def _check_num_levels(num_levels: int) -> int:
    if not isinstance(num_levels, (int, np.integer)) or num_levels < 2:
        raise DomainError(f"num_levels must be an integer >= 2, got {num_levels!r}")
    return int(num_levels)


@dataclass(frozen=True)
class RankLabel:
    """A 1-based ordinal level index."""

    index: int

    def __post_init__(self) -> None:
        if not isinstance(self.index, (int, np.integer)) or self.index < 1:
            raise DomainError(f"rank index must be a positive integer, got {self.index!r}")
        object.__setattr__(self, "index", int(self.index))


def as_rank_indices(labels, num_levels: int) -> np.ndarray:
    """Normalize a sequence of RankLabel or plain integers to a validated int array."""
    num_levels = _check_num_levels(num_levels)
    idx = np.asarray(
        [lab.index if isinstance(lab, RankLabel) else lab for lab in labels], dtype=np.int64
    )
    if idx.size == 0:
        raise DomainError("expected at least one label")
    bad = (idx < 1) | (idx > num_levels)
    if np.any(bad):
        offender = int(idx[bad][0])
        raise DomainError(f"rank {offender} outside {{1..{num_levels}}}")
    return idx


@dataclass(frozen=True)
class CategoricalForecast:
    """Probability vector over the K levels."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 2:
            raise DomainError("probs must be a vector of length K >= 2")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise DomainError("probabilities must lie in [0, 1]")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {probs.sum():.12g}, expected 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def num_levels(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class CumulativeForecast:
    """Cumulative values F_k = P(y <= r_k) for k = 1..K-1.

    Monotonicity is deliberately not required: threshold-style heads may emit
    rank-inconsistent task probabilities and the scoring rules must accept
    them as-is.
    """

    cdf: np.ndarray

    def __post_init__(self) -> None:
        cdf = np.asarray(self.cdf, dtype=np.float64)
        if cdf.ndim != 1 or cdf.size < 1:
            raise DomainError("cdf must be a vector of length K-1 >= 1")
        if np.any(cdf < 0.0) or np.any(cdf > 1.0):
            raise DomainError("cumulative values must lie in [0, 1]")
        cdf.setflags(write=False)
        object.__setattr__(self, "cdf", cdf)

    @property
    def num_levels(self) -> int:
        return self.cdf.size + 1


@dataclass(frozen=True)
class ExtendedBinaryLabels:
    """K-1 bits, bit k = 1{y > r_k}; necessarily a run of 1s followed by 0s."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=np.int64)
        if bits.ndim != 1 or bits.size < 1:
            raise DomainError("bits must be a vector of length K-1 >= 1")
        if not np.all((bits == 0) | (bits == 1)):
            raise DomainError("bits must be 0 or 1")
        if np.any(np.diff(bits) > 0):
            raise DomainError("bits must be non-increasing")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def rank_index(self) -> int:
        return int(self.bits.sum()) + 1


@dataclass(frozen=True)
class OrdinalDataset:
    """Feature matrix, 1-based rank labels, and the declared level count."""

    features: np.ndarray
    labels: np.ndarray
    num_levels: int
    display_offset: int = 0

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        num_levels = _check_num_levels(self.num_levels)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DomainError(f"features must be an N x d matrix with N, d >= 1, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise DomainError("features contain non-finite values")
        labels = as_rank_indices(self.labels, num_levels)
        if labels.size != features.shape[0]:
            raise DomainError(f"{labels.size} labels for {features.shape[0]} feature rows")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "num_levels", num_levels)
        object.__setattr__(self, "display_offset", int(self.display_offset))

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def display_label(self, index: int) -> int:
        return index + self.display_offset

    def take(self, indices: np.ndarray) -> "OrdinalDataset":
        """Subset by row indices, keeping K and the display offset."""
        return OrdinalDataset(
            self.features[indices], self.labels[indices], self.num_levels, self.display_offset
        )


def extend_labels(label: RankLabel | int, num_levels: int) -> ExtendedBinaryLabels:
    """Extend a rank into K-1 binary targets, bit k = 1{y > r_k}."""
    num_levels = _check_num_levels(num_levels)
    index = label.index if isinstance(label, RankLabel) else int(label)
    if not 1 <= index <= num_levels:
        raise DomainError(f"rank {index} outside {{1..{num_levels}}}")
    bits = (index > np.arange(1, num_levels)).astype(np.int64)
    return ExtendedBinaryLabels(bits)


def extend_label_matrix(labels: np.ndarray, num_levels: int) -> np.ndarray:
    """Vectorized extend_labels: (N,) ranks -> (N, K-1) 0/1 matrix."""
    idx = as_rank_indices(labels, num_levels)
    return (idx[:, None] > np.arange(1, num_levels)[None, :]).astype(np.float64)


def degenerate_forecast(label: RankLabel | int, num_levels: int) -> CategoricalForecast:
    """One-hot forecast placing all probability mass on the given level."""
    num_levels = _check_num_levels(num_levels)
    index = label.index if isinstance(label, RankLabel) else int(label)
    if not 1 <= index <= num_levels:
        raise DomainError(f"rank {index} outside {{1..{num_levels}}}")
    probs = np.zeros(num_levels)
    probs[index - 1] = 1.0
    return CategoricalForecast(probs)


def to_cumulative(forecast: CategoricalForecast) -> CumulativeForecast:
    """Partial sums of the level probabilities; the implicit final value 1 is dropped."""
    cdf = np.cumsum(forecast.probs)[:-1]
    # cumsum can overshoot [0, 1] by rounding; the forecast invariant makes this a no-op otherwise
    return CumulativeForecast(np.clip(cdf, 0.0, 1.0))
