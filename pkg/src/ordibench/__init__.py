"""Discrete-level ordinal prediction: output heads, balanced DRPS, benchmark harness."""

from .core import (
    CategoricalForecast,
    CumulativeForecast,
    DomainError,
    ExtendedBinaryLabels,
    OrdinalDataset,
    ParseError,
    RankLabel,
    TrainingError,
    degenerate_forecast,
    extend_labels,
    to_cumulative,
)
from .metrics import (
    ClassWeights,
    MetricReport,
    accuracy,
    adjacent_accuracy,
    balanced_drps,
    confusion_matrix,
    drps,
    evaluate,
    rmse,
)
from .nn import Adam, Mlp, ParamGroup, TrainConfig
from .heads import (
    HeadKind,
    baseline_predict,
    binary_task_decode,
    binary_task_forecast,
    corn_loss,
    corn_unconditional,
    make_head,
    ordered_logit_init,
    ordered_logit_nll,
    ordered_logit_probs,
)
from .data import SyntheticSpec, generate, load_dataset, load_predictions, split_dataset
from .training import (
    OrdinalModel,
    evaluate_model,
    fit,
    init_model,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .benchmark import RunReport, run_benchmark, run_single

__all__ = [
    "Adam",
    "CategoricalForecast",
    "ClassWeights",
    "CumulativeForecast",
    "DomainError",
    "ExtendedBinaryLabels",
    "HeadKind",
    "MetricReport",
    "Mlp",
    "OrdinalDataset",
    "OrdinalModel",
    "ParamGroup",
    "ParseError",
    "RankLabel",
    "RunReport",
    "SyntheticSpec",
    "TrainConfig",
    "TrainingError",
    "accuracy",
    "adjacent_accuracy",
    "balanced_drps",
    "baseline_predict",
    "binary_task_decode",
    "binary_task_forecast",
    "confusion_matrix",
    "corn_loss",
    "corn_unconditional",
    "degenerate_forecast",
    "drps",
    "evaluate",
    "evaluate_model",
    "extend_labels",
    "fit",
    "generate",
    "init_model",
    "load_checkpoint",
    "load_dataset",
    "load_predictions",
    "make_head",
    "ordered_logit_init",
    "ordered_logit_nll",
    "ordered_logit_probs",
    "rmse",
    "run_benchmark",
    "run_single",
    "save_checkpoint",
    "split_dataset",
    "to_cumulative",
    "train",
]
