"""Backbone + head composite, the training loop, and checkpoint files.

A run is fully determined by (dataset, head kind, TrainConfig): one seeded
generator drives parameter init, the validation split, and every batch
shuffle, in that order. Model selection keeps the epoch checkpoint with the
best validation balanced DRPS unless configured otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DomainError, OrdinalDataset, TrainingError
from .heads import Head, HeadKind, make_head
from .metrics import MetricReport, balanced_mean, evaluate, per_sample_drps
from .nn import Adam, Mlp, ParamGroup, TrainConfig

CHECKPOINT_FORMAT = "ordibench-checkpoint"
CHECKPOINT_VERSION = 1


class OrdinalModel:
    """An MLP backbone feeding one output head."""

    def __init__(self, backbone: Mlp, head: Head):
        if backbone.output_dim != head.input_dim:
            raise DomainError(
                f"backbone emits {backbone.output_dim} features, head expects {head.input_dim}"
            )
        self.backbone = backbone
        self.head = head

    @property
    def num_levels(self) -> int:
        return self.head.num_levels

    def params(self) -> dict[str, np.ndarray]:
        out = {f"backbone.{k}": v for k, v in self.backbone.params().items()}
        out.update({f"head.{k}": v for k, v in self.head.params.items()})
        return out

    def param_groups(self) -> list[ParamGroup]:
        """One group per learning-rate multiplier, covering every parameter once."""
        boosts = {f"head.{k}": m for k, m in self.head.lr_multipliers().items()}
        names = sorted(self.params())
        groups = [ParamGroup(tuple(n for n in names if n not in boosts), 1.0)]
        for mult in sorted(set(boosts.values())):
            groups.append(ParamGroup(tuple(n for n in names if boosts.get(n) == mult), mult))
        return [g for g in groups if g.names]

    def loss_and_grads(self, batch: np.ndarray, labels: np.ndarray) -> tuple[float, dict[str, np.ndarray]]:
        acts = self.backbone.forward(batch, record=True)
        loss, d_acts, head_grads = self.head.loss_and_grads(acts, labels)
        grads = {f"backbone.{k}": v for k, v in self.backbone.backward(d_acts).items()}
        grads.update({f"head.{k}": v for k, v in head_grads.items()})
        return loss, grads

    def loss(self, batch: np.ndarray, labels: np.ndarray) -> float:
        return self.head.loss(self.backbone.forward(batch), labels)

    def decode(self, batch: np.ndarray) -> np.ndarray:
        return self.head.decode(self.backbone.forward(batch))

    def forecasts(self, batch: np.ndarray):
        return self.head.forecasts(self.backbone.forward(batch))

    def cdf_rows(self, batch: np.ndarray) -> np.ndarray:
        return self.head.cdf_rows(self.backbone.forward(batch))

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: p.copy() for name, p in self.params().items()}

    def restore(self, saved: dict[str, np.ndarray]) -> None:
        for name, p in self.params().items():
            p[...] = saved[name]


def init_model(
    head_kind: HeadKind | str,
    input_dim: int,
    num_levels: int,
    config: TrainConfig,
    rng: np.random.Generator,
    isotonic_cdf: bool = False,
) -> OrdinalModel:
    backbone = Mlp(input_dim, config.hidden_sizes, rng)
    head = make_head(head_kind, backbone.output_dim, num_levels, rng, isotonic_cdf=isotonic_cdf)
    return OrdinalModel(backbone, head)


@dataclass
class TrainResult:
    model: OrdinalModel
    epoch_losses: list[float]
    val_history: list[float] | None
    best_epoch: int | None
    converged: bool


def _validation_score(model: OrdinalModel, ds: OrdinalDataset, metric: str) -> float:
    if metric == "val_loss":
        return model.loss(ds.features, ds.labels)
    scores = per_sample_drps(model.cdf_rows(ds.features), ds.labels, model.num_levels)
    return balanced_mean(scores, ds.labels)


def train(
    model: OrdinalModel,
    train_ds: OrdinalDataset,
    config: TrainConfig,
    val_ds: OrdinalDataset | None = None,
    rng: np.random.Generator | None = None,
) -> TrainResult:
    """Minibatch training with adaptive-moment updates and best-epoch selection."""
    if rng is None:
        rng = np.random.default_rng(config.seed)

    if val_ds is None and config.validation_fraction > 0.0:
        n_val = int(round(config.validation_fraction * train_ds.num_samples))
        if n_val >= 1:
            perm = rng.permutation(train_ds.num_samples)
            val_ds = train_ds.take(perm[:n_val])
            train_ds = train_ds.take(perm[n_val:])
    tracking = config.checkpoint_metric != "final"
    if tracking and val_ds is None:
        raise DomainError(
            f"checkpoint_metric={config.checkpoint_metric!r} needs validation data; "
            "set validation_fraction > 0, pass a validation set, or use 'final'"
        )

    features, labels = train_ds.features, train_ds.labels
    optimizer = Adam(model.params(), model.param_groups(), base_lr=config.base_lr)

    epoch_losses: list[float] = []
    val_history: list[float] | None = [] if tracking else None
    best_value = np.inf
    best_epoch: int | None = None
    best_params: dict[str, np.ndarray] | None = None
    converged = False

    for epoch in range(config.epochs):
        order = rng.permutation(features.shape[0])
        for start in range(0, order.size, config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            batch_no = start // config.batch_size
            try:
                loss, grads = model.loss_and_grads(features[batch_idx], labels[batch_idx])
                if not np.isfinite(loss):
                    raise TrainingError(f"non-finite loss {loss}")
                optimizer.step(grads)
            except TrainingError as err:
                raise TrainingError(f"epoch {epoch} batch {batch_no}: {err}") from err

        epoch_losses.append(model.loss(features, labels))
        if tracking:
            value = _validation_score(model, val_ds, config.checkpoint_metric)
            val_history.append(value)
            if value < best_value:
                best_value = value
                best_epoch = epoch
                best_params = model.snapshot()
        if (
            config.convergence_tol is not None
            and len(epoch_losses) >= 2
            and abs(epoch_losses[-1] - epoch_losses[-2]) < config.convergence_tol
        ):
            converged = True
            break

    if best_params is not None:
        model.restore(best_params)
    return TrainResult(model, epoch_losses, val_history, best_epoch, converged)


def fit(
    head_kind: HeadKind | str,
    train_ds: OrdinalDataset,
    config: TrainConfig,
    val_ds: OrdinalDataset | None = None,
    isotonic_cdf: bool = False,
) -> TrainResult:
    """Init a fresh model from the config seed and train it."""
    rng = np.random.default_rng(config.seed)
    model = init_model(
        head_kind, train_ds.feature_dim, train_ds.num_levels, config, rng, isotonic_cdf
    )
    return train(model, train_ds, config, val_ds=val_ds, rng=rng)


def evaluate_model(model: OrdinalModel, ds: OrdinalDataset, within: int = 1) -> MetricReport:
    acts = model.backbone.forward(ds.features)
    return evaluate(
        model.head.forecasts(acts), model.head.decode(acts), ds.labels, ds.num_levels, within
    )


def _jsonable(value: np.ndarray) -> float | list:
    return value.tolist()


def save_checkpoint(model: OrdinalModel, path: str | Path) -> None:
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "num_levels": model.num_levels,
        "input_dim": model.backbone.input_dim,
        "hidden_sizes": list(model.backbone.hidden_sizes),
        "head": {
            "kind": model.head.kind.value,
            "isotonic_cdf": bool(getattr(model.head, "isotonic_cdf", False)),
        },
        "params": {name: _jsonable(p) for name, p in model.params().items()},
    }
    Path(path).write_text(json.dumps(blob) + "\n")


def load_checkpoint(path: str | Path) -> OrdinalModel:
    try:
        blob = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise DomainError(f"{path}: not a valid checkpoint: {err}") from err
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise DomainError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise DomainError(f"{path}: unsupported checkpoint version {blob.get('version')!r}")

    rng = np.random.default_rng(0)  # shapes only; parameters are overwritten below
    backbone = Mlp(blob["input_dim"], tuple(blob["hidden_sizes"]), rng)
    head = make_head(
        blob["head"]["kind"],
        backbone.output_dim,
        blob["num_levels"],
        rng,
        isotonic_cdf=blob["head"].get("isotonic_cdf", False),
    )
    model = OrdinalModel(backbone, head)
    for name, p in model.params().items():
        stored = np.asarray(blob["params"][name], dtype=np.float64)
        if stored.shape != p.shape:
            raise DomainError(f"{path}: parameter {name} has shape {stored.shape}, expected {p.shape}")
        p[...] = stored
    return model
