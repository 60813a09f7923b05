"""Fatigue-life regression with derivative-sign penalties on the network inputs."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    DataError,
    EncodedDataset,
    PreprocessorState,
    RawTable,
    correlation_prune,
    fit_preprocessor,
    load_csv,
    train_test_split,
    transform,
)
from .loss import LossConfig, loss_and_grad, loss_pde, loss_total  # noqa: E402
from .network import MlpParams, forward, init_params, input_gradient  # noqa: E402
from .schema import FeatureSchema, FeatureSpec, default_schema, load_schema  # noqa: E402
from .trainer import TrainConfig, build_and_train, evaluate, train  # noqa: E402

__all__ = [
    "DataError",
    "EncodedDataset",
    "FeatureSchema",
    "FeatureSpec",
    "LossConfig",
    "MlpParams",
    "PreprocessorState",
    "RawTable",
    "TrainConfig",
    "build_and_train",
    "correlation_prune",
    "default_schema",
    "evaluate",
    "fit_preprocessor",
    "forward",
    "init_params",
    "input_gradient",
    "load_csv",
    "load_schema",
    "loss_and_grad",
    "loss_pde",
    "loss_total",
    "train",
    "train_test_split",
    "transform",
]
