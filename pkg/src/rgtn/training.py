"""Parameter store, Adam optimizer, and the training/evaluation loops.

Training is deterministic given the configuration seed: initialization and
batch shuffling derive independent child seeds from it, and every update
is a plain single-threaded numpy computation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .data import WindowedDataset, inverse_transform_predictions
from .models import ModelConfig, forward, init_params, param_count, predict

__all__ = [
    "Param",
    "ParamStore",
    "TrainConfig",
    "TrainingDiverged",
    "adam_step",
    "train",
    "evaluate",
]

LOSSES = ("mae", "mse", "cross_entropy")


@dataclass
class Param:
    """One named trainable tensor with its gradient and Adam state."""

    name: str
    value: np.ndarray
    grad: np.ndarray | None = None
    m: np.ndarray | None = None
    v: np.ndarray | None = None


class ParamStore:
    """Ordered collection of named parameters with a shared step counter."""

    def __init__(self, params: dict[str, Param], step: int = 0) -> None:
        self.params = params
        self.step = step

    @classmethod
    def from_values(cls, values: Mapping[str, np.ndarray]) -> "ParamStore":
        return cls(
            {
                name: Param(name=name, value=np.array(arr, dtype=float))
                for name, arr in values.items()
            }
        )

    def values(self) -> dict[str, np.ndarray]:
        return {name: p.value for name, p in self.params.items()}

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

    def total_count(self) -> int:
        return sum(p.value.size for p in self.params.values())

    def __getitem__(self, name: str) -> Param:
        return self.params[name]

    def __iter__(self):
        return iter(self.params.values())


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    seed: int = 0
    loss: str = "mae"
    clip_norm: float | None = None

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.learning_rate < 0 or self.eps <= 0 or self.batch_size < 1:
            raise ValueError("rates must be positive and batch_size >= 1")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie strictly between 0 and 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive when set")


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the trace recorded so far."""

    def __init__(self, message: str, trace: list[dict]) -> None:
        super().__init__(message)
        self.trace = trace


def adam_step(store: ParamStore, config: TrainConfig) -> None:
    """One bias-corrected Adam update; parameters without gradients stay put."""
    active = [p for p in store if p.grad is not None]
    for p in active:
        if not np.all(np.isfinite(p.grad)):
            raise FloatingPointError(f"non-finite gradient for parameter {p.name!r}")
    if config.clip_norm is not None and active:
        total = float(np.sqrt(sum(float((p.grad**2).sum()) for p in active)))
        if total > config.clip_norm:
            factor = config.clip_norm / total
            for p in active:
                p.grad = p.grad * factor
    store.step += 1
    t = store.step
    for p in active:
        if p.m is None:
            p.m = np.zeros_like(p.value)
            p.v = np.zeros_like(p.value)
        p.m = config.beta1 * p.m + (1.0 - config.beta1) * p.grad
        p.v = config.beta2 * p.v + (1.0 - config.beta2) * p.grad**2
        m_hat = p.m / (1.0 - config.beta1**t)
        v_hat = p.v / (1.0 - config.beta2**t)
        p.value = p.value - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)


def _loss_node(loss: str, preds: ad.TapeNode, targets: np.ndarray) -> ad.TapeNode:
    if loss == "mae":
        return ad.mae_loss(preds, targets)
    if loss == "mse":
        return ad.mse_loss(preds, targets)
    return ad.cross_entropy_loss(preds, targets)


def _split_loss(
    model: ModelConfig,
    values: Mapping[str, np.ndarray],
    loss: str,
    inputs: np.ndarray,
    targets: np.ndarray,
) -> float:
    preds = forward(model, values, inputs)
    return float(_loss_node(loss, preds, targets).array)


def train(
    model: ModelConfig, dataset: WindowedDataset, config: TrainConfig
) -> tuple[ParamStore, list[dict]]:
    """Fit the model on the train split, tracking train/validation loss."""
    seeds = np.random.SeedSequence(config.seed).generate_state(2)
    store = ParamStore.from_values(init_params(model, int(seeds[0])))
    shuffle_rng = np.random.default_rng(int(seeds[1]))
    train_idx = dataset.splits.train
    val_inputs, val_targets = dataset.subset(dataset.splits.val)
    trace: list[dict] = []
    for epoch in range(1, config.epochs + 1):
        order = train_idx[shuffle_rng.permutation(len(train_idx))]
        seen, loss_sum = 0, 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            x, y = dataset.inputs[batch], dataset.targets[batch]
            store.zero_grads()
            nodes = {name: ad.constant(p.value) for name, p in store.params.items()}
            loss = _loss_node(config.loss, forward(model, nodes, x), y)
            value = float(loss.array)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}", trace
                )
            ad.backward(loss)
            for name, node in nodes.items():
                store[name].grad = node.grad
            adam_step(store, config)
            loss_sum += value * len(batch)
            seen += len(batch)
        record = {
            "epoch": epoch,
            "train_loss": loss_sum / max(seen, 1),
            "val_loss": (
                _split_loss(model, store.values(), config.loss, val_inputs, val_targets)
                if len(val_inputs)
                else float("nan")
            ),
        }
        trace.append(record)
    return store, trace


def evaluate(
    model: ModelConfig,
    values: Mapping[str, np.ndarray],
    dataset: WindowedDataset,
    split: str = "test",
) -> dict:
    """Single-pass metrics on one split; parameters are not touched."""
    indices = getattr(dataset.splits, split)
    if len(indices) == 0:
        raise ValueError(f"split {split!r} is empty")
    inputs, targets = dataset.subset(indices)
    started = time.perf_counter()
    preds = predict(model, values, inputs)
    metrics: dict = {
        "task": dataset.task,
        "split": split,
        "n_samples": int(len(indices)),
        "parameter_count": param_count(model)[1],
    }
    if dataset.task == "regression":
        preds_raw = inverse_transform_predictions(dataset, preds)
        targets_raw = inverse_transform_predictions(dataset, targets)
        metrics["mae"] = float(np.abs(preds_raw - targets_raw).mean())
    else:
        labels = preds.argmax(axis=1)
        metrics["accuracy"] = float((labels == targets).mean())
    metrics["wall_time_s"] = time.perf_counter() - started
    return metrics
