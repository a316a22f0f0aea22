"""Output heads: six trainable strategies plus two label-only baselines.

Every trainable head owns the parameters sitting on top of the backbone's
penultimate activations and knows three things: its loss (with analytic
gradients for the activations and its own parameters), how to decode a hard
rank, and how to emit a probabilistic forecast. The threshold-style heads
share the extended-binary machinery: K-1 tasks, task k predicting
P(y > r_k), decoded by counting tasks above 0.5.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum

import numpy as np

from .core import (
    CategoricalForecast,
    CumulativeForecast,
    DomainError,
    TrainingError,
    as_rank_indices,
    extend_label_matrix,
)
from .nn import fan_in_uniform

PROB_CLAMP = 1e-12


class HeadKind(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"
    ORNN = "ornn"
    CORAL = "coral"
    CORN = "corn"
    ORDERED_LOGIT = "ordered_logit"
    RANDOM = "random"
    MAJORITY = "majority"


TRAINED_KINDS = (
    HeadKind.REGRESSION,
    HeadKind.CLASSIFICATION,
    HeadKind.ORNN,
    HeadKind.CORAL,
    HeadKind.CORN,
    HeadKind.ORDERED_LOGIT,
)
BASELINE_KINDS = (HeadKind.RANDOM, HeadKind.MAJORITY)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Logistic CDF, overflow-safe on both tails."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_finite(name: str, arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise TrainingError(f"non-finite {name}")
    return arr


class Head(ABC):
    """Loss, decode, and forecast for one output strategy."""

    kind: HeadKind

    def __init__(self, input_dim: int, num_levels: int):
        if num_levels < 2:
            raise DomainError(f"num_levels must be >= 2, got {num_levels}")
        self.input_dim = int(input_dim)
        self.num_levels = int(num_levels)
        self.params: dict[str, np.ndarray] = {}

    @abstractmethod
    def loss_and_grads(
        self, acts: np.ndarray, labels: np.ndarray
    ) -> tuple[float, np.ndarray, dict[str, np.ndarray]]:
        """Return (batch loss, dL/d_acts, dL/d_params)."""

    def loss(self, acts: np.ndarray, labels: np.ndarray) -> float:
        return self.loss_and_grads(acts, labels)[0]

    @abstractmethod
    def decode(self, acts: np.ndarray) -> np.ndarray:
        """Hard 1-based rank per sample."""

    @abstractmethod
    def forecasts(self, acts: np.ndarray) -> list | None:
        """Probabilistic forecasts, or None for label-only heads."""

    def cdf_rows(self, acts: np.ndarray) -> np.ndarray:
        """(N, K-1) cumulative matrix; label-only heads emit step functions at decode."""
        step = np.arange(1, self.num_levels)[None, :]
        return (step >= self.decode(acts)[:, None]).astype(np.float64)

    def lr_multipliers(self) -> dict[str, float]:
        """Per-parameter learning-rate multipliers; absent names default to 1."""
        return {}


# ---------------------------------------------------------------------------
# Regression and classification


class RegressionHead(Head):
    """Scalar score trained with squared error against the rank index."""

    kind = HeadKind.REGRESSION

    def __init__(self, input_dim: int, num_levels: int, rng: np.random.Generator):
        super().__init__(input_dim, num_levels)
        self.params = {
            "w": fan_in_uniform(rng, (input_dim,), input_dim),
            "b": fan_in_uniform(rng, (), input_dim),
        }

    def _scores(self, acts: np.ndarray) -> np.ndarray:
        return acts @ self.params["w"] + self.params["b"]

    def loss_and_grads(self, acts, labels):
        scores = _check_finite("regression score", self._scores(acts))
        target = labels.astype(np.float64)
        resid = scores - target
        loss = float(np.mean(resid**2))
        d_scores = 2.0 * resid / resid.size
        grads = {
            "w": acts.T @ d_scores,
            "b": np.asarray(d_scores.sum()),
        }
        return loss, d_scores[:, None] * self.params["w"][None, :], grads

    def decode(self, acts):
        return regression_decode(self._scores(acts), self.num_levels)

    def forecasts(self, acts):
        return None


def regression_decode(scores: np.ndarray, num_levels: int) -> np.ndarray:
    """Nearest rank index; ties at .5 go to the higher index, out of range clamps."""
    scores = _check_finite("regression score", scores)
    idx = np.floor(scores + 0.5)
    return np.clip(idx, 1, num_levels).astype(np.int64)


class ClassificationHead(Head):
    """K unordered logits trained with cross-entropy; decode is the argmax."""

    kind = HeadKind.CLASSIFICATION

    def __init__(self, input_dim: int, num_levels: int, rng: np.random.Generator):
        super().__init__(input_dim, num_levels)
        self.params = {
            "W": fan_in_uniform(rng, (input_dim, num_levels), input_dim),
            "b": fan_in_uniform(rng, (num_levels,), input_dim),
        }

    def _logits(self, acts: np.ndarray) -> np.ndarray:
        return acts @ self.params["W"] + self.params["b"]

    def loss_and_grads(self, acts, labels):
        logits = _check_finite("classification logits", self._logits(acts))
        logp = log_softmax(logits)
        batch = np.arange(labels.size)
        loss = float(-np.mean(logp[batch, labels - 1]))
        d_logits = np.exp(logp)
        d_logits[batch, labels - 1] -= 1.0
        d_logits /= labels.size
        grads = {"W": acts.T @ d_logits, "b": d_logits.sum(axis=0)}
        return loss, d_logits @ self.params["W"].T, grads

    def probabilities(self, acts: np.ndarray) -> np.ndarray:
        return np.exp(log_softmax(self._logits(acts)))

    def decode(self, acts):
        return np.argmax(self.probabilities(acts), axis=1).astype(np.int64) + 1

    def forecasts(self, acts):
        return [CategoricalForecast(row) for row in self.probabilities(acts)]

    def cdf_rows(self, acts):
        return np.cumsum(self.probabilities(acts), axis=1)[:, :-1]


# ---------------------------------------------------------------------------
# Extended-binary machinery shared by OR-NN, CORAL, and CORN


def binary_task_decode(task_probs: np.ndarray) -> np.ndarray:
    """Rank = 1 + number of tasks predicting "above" with probability > 0.5.

    The counting rule is total: rank-inconsistent task probabilities still
    decode (they just skip levels).
    """
    task_probs = np.asarray(task_probs, dtype=np.float64)
    if np.any(task_probs < 0.0) or np.any(task_probs > 1.0):
        raise DomainError("task probabilities must lie in [0, 1]")
    axis = task_probs.ndim - 1
    return 1 + np.sum(task_probs > 0.5, axis=axis).astype(np.int64)


def binary_task_forecast(task_probs: np.ndarray, isotonic: bool = False) -> CumulativeForecast:
    """Cumulative forecast F_k = 1 - P(y > r_k), raw by default.

    With isotonic=True a running maximum replaces the sequence, repairing
    rank-inconsistent (non-monotone) raw values.
    """
    task_probs = np.asarray(task_probs, dtype=np.float64)
    if np.any(task_probs < 0.0) or np.any(task_probs > 1.0):
        raise DomainError("task probabilities must lie in [0, 1]")
    cdf = 1.0 - task_probs
    if isotonic:
        cdf = np.maximum.accumulate(cdf)
    return CumulativeForecast(cdf)


def _bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    # elementwise softplus(z) - z*t == -[t log s(z) + (1-t) log(1-s(z))], overflow-safe
    return softplus(logits) - logits * targets


class _BinaryTaskHead(Head):
    """Common decode/forecast plumbing over K-1 per-task probabilities."""

    isotonic_cdf = False

    def task_probs(self, acts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode(self, acts):
        return binary_task_decode(self.task_probs(acts))

    def forecasts(self, acts):
        return [binary_task_forecast(row, self.isotonic_cdf) for row in self.task_probs(acts)]

    def cdf_rows(self, acts):
        cdf = 1.0 - self.task_probs(acts)
        if self.isotonic_cdf:
            cdf = np.maximum.accumulate(cdf, axis=1)
        return cdf


class OrnnHead(_BinaryTaskHead):
    """K-1 independent binary classifiers on the extended labels.

    Each task has its own weights and bias, so nothing forces the task
    probabilities to be monotone; forecasts may be rank inconsistent.
    """

    kind = HeadKind.ORNN

    def __init__(self, input_dim: int, num_levels: int, rng: np.random.Generator, isotonic_cdf: bool = False):
        super().__init__(input_dim, num_levels)
        self.isotonic_cdf = bool(isotonic_cdf)
        self.params = {
            "W": fan_in_uniform(rng, (input_dim, num_levels - 1), input_dim),
            "b": fan_in_uniform(rng, (num_levels - 1,), input_dim),
        }

    def _logits(self, acts: np.ndarray) -> np.ndarray:
        return acts @ self.params["W"] + self.params["b"]

    def loss_and_grads(self, acts, labels):
        logits = _check_finite("binary-task logits", self._logits(acts))
        extended = extend_label_matrix(labels, self.num_levels)
        batch = labels.size
        loss = float(_bce_with_logits(logits, extended).sum() / batch)
        d_logits = (sigmoid(logits) - extended) / batch
        grads = {"W": acts.T @ d_logits, "b": d_logits.sum(axis=0)}
        return loss, d_logits @ self.params["W"].T, grads

    def task_probs(self, acts):
        return sigmoid(self._logits(acts))


def ornn_loss(binary_logits: np.ndarray, extended_bits: np.ndarray) -> float:
    """Sum of per-task binary cross-entropies, averaged over the batch."""
    logits = _check_finite("binary-task logits", np.atleast_2d(binary_logits))
    bits = np.atleast_2d(np.asarray(extended_bits, dtype=np.float64))
    if logits.shape != bits.shape:
        raise DomainError(f"logit shape {logits.shape} does not match label shape {bits.shape}")
    return float(_bce_with_logits(logits, bits).sum() / logits.shape[0])


class CoralHead(_BinaryTaskHead):
    """One shared score plus K-1 free biases: task k fires at sigmoid(score + b_k).

    The shared weight vector makes the task probabilities ordered whenever
    the biases are, which the loss pushes them toward.
    """

    kind = HeadKind.CORAL

    def __init__(self, input_dim: int, num_levels: int, rng: np.random.Generator):
        super().__init__(input_dim, num_levels)
        self.params = {
            "w": fan_in_uniform(rng, (input_dim,), input_dim),
            "biases": fan_in_uniform(rng, (num_levels - 1,), input_dim),
        }

    def _logits(self, acts: np.ndarray) -> np.ndarray:
        scores = acts @ self.params["w"]
        return scores[:, None] + self.params["biases"][None, :]

    def loss_and_grads(self, acts, labels):
        logits = _check_finite("shared-score logits", self._logits(acts))
        extended = extend_label_matrix(labels, self.num_levels)
        batch = labels.size
        loss = float(_bce_with_logits(logits, extended).sum() / batch)
        d_logits = (sigmoid(logits) - extended) / batch
        d_scores = d_logits.sum(axis=1)
        grads = {"w": acts.T @ d_scores, "biases": d_logits.sum(axis=0)}
        return loss, d_scores[:, None] * self.params["w"][None, :], grads

    def task_probs(self, acts):
        return sigmoid(self._logits(acts))


def coral_task_probs(shared_scores: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """sigmoid(score + b_k) for each of the K-1 tasks."""
    scores = np.asarray(shared_scores, dtype=np.float64)
    return sigmoid(scores[..., None] + np.asarray(biases, dtype=np.float64))


class CornHead(_BinaryTaskHead):
    """Conditional tasks: task k trains only on samples with y > r_{k-1}.

    Task outputs are conditional probabilities P(y > r_k | y > r_{k-1});
    chaining them by cumulative product yields unconditional probabilities
    that are non-increasing by construction.
    """

    kind = HeadKind.CORN

    def __init__(self, input_dim: int, num_levels: int, rng: np.random.Generator):
        super().__init__(input_dim, num_levels)
        self.params = {
            "W": fan_in_uniform(rng, (input_dim, num_levels - 1), input_dim),
            "b": fan_in_uniform(rng, (num_levels - 1,), input_dim),
        }

    def _logits(self, acts: np.ndarray) -> np.ndarray:
        return acts @ self.params["W"] + self.params["b"]

    def loss_and_grads(self, acts, labels):
        logits = _check_finite("conditional-task logits", self._logits(acts))
        mask, targets, total = corn_task_sets(labels, self.num_levels)
        loss = float((_bce_with_logits(logits, targets) * mask).sum() / total)
        d_logits = mask * (sigmoid(logits) - targets) / total
        grads = {"W": acts.T @ d_logits, "b": d_logits.sum(axis=0)}
        return loss, d_logits @ self.params["W"].T, grads

    def task_probs(self, acts):
        return corn_unconditional(self._logits(acts))


def corn_task_sets(labels: np.ndarray, num_levels: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Contribution mask and binary targets for the conditional tasks.

    Task k (column k-1) draws its samples from {i : y_i > r_{k-1}}, so the
    first task sees the whole batch. Returns (mask, targets, total count).
    """
    idx = as_rank_indices(labels, num_levels)
    ks = np.arange(1, num_levels)
    mask = (idx[:, None] > (ks - 1)[None, :]).astype(np.float64)
    targets = (idx[:, None] > ks[None, :]).astype(np.float64)
    return mask, targets, int(mask.sum())


def corn_loss(task_logits: np.ndarray, labels: np.ndarray, num_levels: int) -> float:
    """BCE summed over contributing (sample, task) pairs, divided by their count."""
    logits = _check_finite("conditional-task logits", np.atleast_2d(task_logits))
    mask, targets, total = corn_task_sets(labels, num_levels)
    if logits.shape != mask.shape:
        raise DomainError(f"logit shape {logits.shape} does not match {mask.shape}")
    return float((_bce_with_logits(logits, targets) * mask).sum() / total)


def corn_unconditional(task_logits: np.ndarray) -> np.ndarray:
    """Chain conditional sigmoids into unconditional P(y > r_k) by running product."""
    probs = sigmoid(np.asarray(task_logits, dtype=np.float64))
    axis = probs.ndim - 1
    return np.cumprod(probs, axis=axis)


# ---------------------------------------------------------------------------
# Ordered logit


def ordered_logit_thresholds(delta: np.ndarray) -> np.ndarray:
    """Materialized thresholds (mu_0 .. mu_{K-2}) with mu_0 = 0 fixed.

    mu_k = mu_{k-1} + exp(delta_k), so any finite delta yields strictly
    increasing thresholds. The infinite endpoints are never materialized.
    """
    delta = _check_finite("delta", np.asarray(delta, dtype=np.float64))
    return np.concatenate([[0.0], np.cumsum(np.exp(delta))])


def ordered_logit_probs(score, delta: np.ndarray, num_levels: int) -> np.ndarray:
    """Class probabilities P(y = r_k) = F(mu_k - score) - F(mu_{k-1} - score).

    F is the logistic CDF; the implied endpoint CDF values are 0 and 1.
    Accepts a scalar score or a batch; returns (K,) or (B, K).
    """
    delta = np.asarray(delta, dtype=np.float64)
    if delta.size != num_levels - 2:
        raise DomainError(f"expected {num_levels - 2} delta values for K={num_levels}, got {delta.size}")
    scores = _check_finite("score", np.atleast_1d(score))
    mu = ordered_logit_thresholds(delta)
    cdf = sigmoid(mu[None, :] - scores[:, None])
    probs = np.empty((scores.size, num_levels))
    probs[:, 0] = cdf[:, 0]
    probs[:, 1:-1] = np.diff(cdf, axis=1)
    probs[:, -1] = 1.0 - cdf[:, -1]
    return probs[0] if np.isscalar(score) or np.ndim(score) == 0 else probs


def ordered_logit_nll(probs, labels) -> float:
    """Mean negative log class probability, clamped below at 1e-12 before the log."""
    if isinstance(probs, CategoricalForecast):
        probs = probs.probs
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    idx = as_rank_indices(np.atleast_1d(labels), p.shape[1])
    picked = p[np.arange(idx.size), idx - 1]
    return float(-np.mean(np.log(np.maximum(picked, PROB_CLAMP))))


def ordered_logit_init(num_levels: int) -> tuple[np.ndarray, float]:
    """Equal-probability-mass initialization for (delta, output bias).

    Places the K-1 raw thresholds at the logistic quantiles j/K, shifts them
    so the first is zero, and sets the bias to the shift so a zero-weight
    network starts exactly uniform over the levels.
    """
    if num_levels < 2:
        raise DomainError(f"num_levels must be >= 2, got {num_levels}")
    j = np.arange(1, num_levels) / num_levels
    raw = np.log(j / (1.0 - j))
    shifted = raw - raw[0]
    delta = np.log(np.diff(shifted))
    return delta, float(-raw[0])


class OrderedLogitHead(Head):
    """Latent-utility head: scalar score against monotone thresholds.

    The score plays the role of the latent utility's mean; the observed
    level is the interval the utility falls into under logistic noise.
    Trained by negative log-likelihood. The threshold increments and the
    score bias learn 100x faster than the rest of the network.
    """

    kind = HeadKind.ORDERED_LOGIT
    LR_BOOST = 100.0

    def __init__(self, input_dim: int, num_levels: int, rng: np.random.Generator):
        super().__init__(input_dim, num_levels)
        delta, bias = ordered_logit_init(num_levels)
        self.params = {
            "w": fan_in_uniform(rng, (input_dim,), input_dim),
            "b": np.asarray(bias),
            "delta": delta,
        }

    def lr_multipliers(self):
        return {"delta": self.LR_BOOST, "b": self.LR_BOOST}

    def _scores(self, acts: np.ndarray) -> np.ndarray:
        return acts @ self.params["w"] + self.params["b"]

    def probabilities(self, acts: np.ndarray) -> np.ndarray:
        return ordered_logit_probs(self._scores(acts), self.params["delta"], self.num_levels)

    def loss_and_grads(self, acts, labels):
        scores = _check_finite("score", self._scores(acts))
        delta = _check_finite("delta", self.params["delta"])
        num_levels = self.num_levels
        batch = labels.size

        mu = ordered_logit_thresholds(delta)
        cdf = sigmoid(mu[None, :] - scores[:, None])
        pdf = cdf * (1.0 - cdf)  # logistic density at the same points

        cls = labels - 1  # 0-based class, upper threshold index = cls, lower = cls - 1
        upper_ok = cls <= num_levels - 2
        lower_ok = cls >= 1
        rows = np.arange(batch)
        upper_cdf = np.where(upper_ok, cdf[rows, np.minimum(cls, num_levels - 2)], 1.0)
        lower_cdf = np.where(lower_ok, cdf[rows, np.maximum(cls - 1, 0)], 0.0)
        picked = upper_cdf - lower_cdf

        clamped = np.maximum(picked, PROB_CLAMP)
        loss = float(-np.mean(np.log(clamped)))
        # d loss / d picked, zero where the clamp is active
        coef = np.where(picked > PROB_CLAMP, -1.0 / (batch * clamped), 0.0)

        upper_pdf = np.where(upper_ok, pdf[rows, np.minimum(cls, num_levels - 2)], 0.0)
        lower_pdf = np.where(lower_ok, pdf[rows, np.maximum(cls - 1, 0)], 0.0)
        d_scores = coef * (lower_pdf - upper_pdf)

        d_mu = np.zeros(num_levels - 1)
        np.add.at(d_mu, np.minimum(cls, num_levels - 2), np.where(upper_ok, coef * upper_pdf, 0.0))
        np.add.at(d_mu, np.maximum(cls - 1, 0), np.where(lower_ok, -coef * lower_pdf, 0.0))
        # mu_j = sum_{m<=j} exp(delta_m) for j >= 1, so d mu_j / d delta_m = exp(delta_m) 1{m <= j}
        d_delta = np.exp(delta) * np.cumsum(d_mu[1:][::-1])[::-1]

        grads = {
            "w": acts.T @ d_scores,
            "b": np.asarray(d_scores.sum()),
            "delta": d_delta,
        }
        return loss, d_scores[:, None] * self.params["w"][None, :], grads

    def decode(self, acts):
        return np.argmax(self.probabilities(acts), axis=1).astype(np.int64) + 1

    def forecasts(self, acts):
        return [CategoricalForecast(row) for row in self.probabilities(acts)]

    def cdf_rows(self, acts):
        return np.cumsum(self.probabilities(acts), axis=1)[:, :-1]


def ordered_logit_decode(probs) -> np.ndarray:
    """Argmax class, ties to the lowest index."""
    if isinstance(probs, CategoricalForecast):
        probs = probs.probs
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    decoded = np.argmax(p, axis=1).astype(np.int64) + 1
    return decoded[0] if np.ndim(probs) == 1 else decoded


# ---------------------------------------------------------------------------
# Construction and baselines


def make_head(
    kind: HeadKind | str,
    input_dim: int,
    num_levels: int,
    rng: np.random.Generator,
    isotonic_cdf: bool = False,
) -> Head:
    kind = HeadKind(kind)
    if kind is HeadKind.REGRESSION:
        return RegressionHead(input_dim, num_levels, rng)
    if kind is HeadKind.CLASSIFICATION:
        return ClassificationHead(input_dim, num_levels, rng)
    if kind is HeadKind.ORNN:
        return OrnnHead(input_dim, num_levels, rng, isotonic_cdf=isotonic_cdf)
    if kind is HeadKind.CORAL:
        return CoralHead(input_dim, num_levels, rng)
    if kind is HeadKind.CORN:
        return CornHead(input_dim, num_levels, rng)
    if kind is HeadKind.ORDERED_LOGIT:
        return OrderedLogitHead(input_dim, num_levels, rng)
    raise DomainError(f"{kind.value!r} is a baseline, not a trainable head")


def baseline_predict(
    kind: HeadKind | str,
    train_labels: np.ndarray,
    eval_size: int,
    seed: int,
    num_levels: int,
) -> np.ndarray:
    """Hard labels for the two reference predictors.

    random: uniform over {1..K} from the given seed. majority: the training
    mode (ties to the lowest rank), repeated. Forecasts for either are the
    degenerate distributions at these labels.
    """
    kind = HeadKind(kind)
    if eval_size < 1:
        raise DomainError(f"eval_size must be >= 1, got {eval_size}")
    if kind is HeadKind.RANDOM:
        rng = np.random.default_rng(seed)
        return rng.integers(1, num_levels + 1, size=eval_size).astype(np.int64)
    if kind is HeadKind.MAJORITY:
        if len(train_labels) == 0:
            raise DomainError("majority baseline needs at least one training label")
        idx = as_rank_indices(train_labels, num_levels)
        counts = np.bincount(idx, minlength=num_levels + 1)[1:]
        mode = int(np.argmax(counts)) + 1  # argmax takes the lowest rank on ties
        return np.full(eval_size, mode, dtype=np.int64)
    raise DomainError(f"{kind.value!r} is not a baseline kind")
