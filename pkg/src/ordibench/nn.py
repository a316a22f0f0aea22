"""Minimal feedforward backbone and adaptive-moment optimizer.

Everything runs in float64 on numpy. The backbone maps a feature batch to
penultimate-layer activations; output heads own their final parameters and
losses. Training is deterministic given a seed: parameter init, batch
shuffling, and every update are driven by explicitly seeded generators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, TrainingError

CHECKPOINT_METRICS = ("balanced_drps", "val_loss", "final")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    batch_size: int = 128
    base_lr: float = 1e-3
    seed: int = 0
    hidden_sizes: tuple[int, ...] = (64, 64)
    validation_fraction: float = 0.1
    checkpoint_metric: str = "balanced_drps"
    # optional early stop: quit once the full-data loss moves less than this per epoch
    convergence_tol: float | None = None

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise DomainError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.base_lr > 0:
            raise DomainError(f"base_lr must be > 0, got {self.base_lr}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise DomainError(f"validation_fraction must be in [0, 1), got {self.validation_fraction}")
        if self.checkpoint_metric not in CHECKPOINT_METRICS:
            raise DomainError(
                f"checkpoint_metric must be one of {CHECKPOINT_METRICS}, got {self.checkpoint_metric!r}"
            )
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))


def fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Mlp:
    """Affine layers with ReLU after each; output = last hidden activations.

    With no hidden layers the backbone is the identity and downstream heads
    consume the raw features.
    """

    def __init__(self, input_dim: int, hidden_sizes: tuple[int, ...], rng: np.random.Generator):
        if input_dim < 1:
            raise DomainError(f"input_dim must be >= 1, got {input_dim}")
        self.input_dim = int(input_dim)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        fan_in = self.input_dim
        for width in self.hidden_sizes:
            if width < 1:
                raise DomainError(f"hidden layer width must be >= 1, got {width}")
            self.weights.append(fan_in_uniform(rng, (fan_in, width), fan_in))
            self.biases.append(fan_in_uniform(rng, (width,), fan_in))
            fan_in = width
        self.output_dim = fan_in
        self._cache: list[tuple[np.ndarray, np.ndarray]] | None = None

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"] = w
            out[f"b{i}"] = b
        return out

    def forward(self, batch: np.ndarray, record: bool = False) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise DomainError(f"batch shape {batch.shape} does not match input_dim={self.input_dim}")
        cache = [] if record else None
        acts = batch
        for w, b in zip(self.weights, self.biases):
            pre = acts @ w + b
            if record:
                cache.append((acts, pre))
            acts = np.maximum(pre, 0.0)
        if record:
            self._cache = cache
        return acts

    def backward(self, d_acts: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients for every backbone parameter given dL/d(output activations)."""
        if self._cache is None:
            raise RuntimeError("backward called without a recorded forward pass")
        cache, self._cache = self._cache, None
        grads: dict[str, np.ndarray] = {}
        upstream = d_acts
        for i in range(len(cache) - 1, -1, -1):
            inputs, pre = cache[i]
            d_pre = upstream * (pre > 0.0)
            grads[f"W{i}"] = inputs.T @ d_pre
            grads[f"b{i}"] = d_pre.sum(axis=0)
            upstream = d_pre @ self.weights[i].T
        return grads


@dataclass(frozen=True)
class ParamGroup:
    """Names of parameters sharing one learning-rate multiplier."""

    names: tuple[str, ...]
    lr_multiplier: float = 1.0

    def __post_init__(self) -> None:
        if not self.lr_multiplier > 0:
            raise DomainError(f"lr_multiplier must be > 0, got {self.lr_multiplier}")
        object.__setattr__(self, "names", tuple(self.names))


class Adam:
    """Bias-corrected adaptive-moment updates with per-group rate multipliers."""

    def __init__(
        self,
        params: dict[str, np.ndarray],
        groups: list[ParamGroup],
        base_lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        grouped = [name for g in groups for name in g.names]
        if sorted(grouped) != sorted(params):
            raise DomainError(
                f"param groups must cover every parameter exactly once; "
                f"groups={sorted(grouped)} params={sorted(params)}"
            )
        self.params = params
        self.lr = {name: base_lr * g.lr_multiplier for g in groups for name in g.names}
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, p in self.params.items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for parameter {name!r}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1**self.t)
            v_hat = v / (1.0 - self.beta2**self.t)
            p -= self.lr[name] * m_hat / (np.sqrt(v_hat) + self.eps)
