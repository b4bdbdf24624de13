"""Trainable sequence models: the two graph-filter variants and the RNN.

A model reads a batch of order-3 windows (batch, tau, physical, feature)
and emits one output vector per window.

grgtn / srgtn: the input projection maps the feature mode to the hidden
mode, the time graph couples the window, and a three-core tensor-train
head contracts the filtered (tau, physical, hidden) block down to the
outputs.  The general variant adds the trainable propagation matrix W_r;
with otherwise identical configuration the two differ by exactly
hidden^2 parameters.

rnn: the matched baseline flattens physical x feature per step, runs the
recurrence, and applies the dense equivalent of the head to the full
hidden-state block.

Flattened vector layouts follow the package-wide first-mode-fastest
convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Mapping

import numpy as np

from . import autodiff as ad
from .graph import build_time_adjacency

__all__ = [
    "HeadConfig",
    "ModelConfig",
    "param_shapes",
    "param_count",
    "init_params",
    "forward",
    "predict",
    "VARIANTS",
]

VARIANTS = ("grgtn", "srgtn", "rnn")

_TAPE_ACTIVATIONS = {
    "tanh": ad.tanh,
    "sigmoid": ad.sigmoid,
    "relu": ad.relu,
    "identity": lambda node: node,
}


@dataclass(frozen=True)
class HeadConfig:
    """Output head: tensor-train, dense, or none (raw flattened features)."""

    kind: str = "tt"
    ranks: tuple[int, int] = (2, 2)
    out_modes: tuple[int, int, int] | None = None
    bias: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("tt", "dense", "none"):
            raise ValueError(f"unknown head kind {self.kind!r}")
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if self.out_modes is not None:
            object.__setattr__(
                self, "out_modes", tuple(int(d) for d in self.out_modes)
            )


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    tau: int
    d_phys: int
    d_feat: int
    hidden: int
    out_dim: int
    task: str = "regression"
    c: float = 0.5
    activation: str = "tanh"
    head: HeadConfig = field(default_factory=HeadConfig)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")
        for name in ("tau", "d_phys", "d_feat", "hidden", "out_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.activation not in _TAPE_ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.variant != "rnn" and not 0.0 < self.c < 1.0:
            raise ValueError(f"c must lie strictly between 0 and 1, got {self.c}")
        if self.variant == "rnn" and self.head.kind == "tt":
            raise ValueError("the rnn baseline uses a dense head, not tt")
        if self.head.kind == "tt":
            modes = self.head.out_modes
            if modes is None:
                raise ValueError("a tt head needs out_modes (no auto-factoring)")
            if len(modes) != 3:
                raise ValueError("out_modes must pair with (tau, physical, hidden)")
            if prod(modes) != self.out_dim:
                raise ValueError(
                    f"out_modes {modes} do not multiply to out_dim {self.out_dim}"
                )
        if self.head.kind == "none" and self.out_dim != prod(self.feature_block):
            raise ValueError(
                "with no head, out_dim must equal the flattened feature block "
                f"{prod(self.feature_block)}"
            )

    @property
    def feature_block(self) -> tuple[int, ...]:
        """Shape of the per-window feature tensor entering the head."""
        if self.variant == "rnn":
            return (self.tau, self.hidden)
        return (self.tau, self.d_phys, self.hidden)

    @property
    def in_modes(self) -> tuple[int, int, int]:
        return (self.tau, self.d_phys, self.hidden)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Ordered trainable parameter shapes for a configuration."""
    shapes: dict[str, tuple[int, ...]] = {}
    if config.variant == "rnn":
        shapes["w_x"] = (config.hidden, config.d_phys * config.d_feat)
        shapes["w_h"] = (config.hidden, config.hidden)
        shapes["b_h"] = (config.hidden,)
    else:
        shapes["w_x"] = (config.hidden, config.d_feat)
        if config.variant == "grgtn":
            shapes["w_r"] = (config.hidden, config.hidden)
    head = config.head
    if head.kind == "tt":
        full = (1,) + head.ranks + (1,)
        for k, (i, o) in enumerate(zip(config.in_modes, head.out_modes)):
            shapes[f"head.core{k}"] = (full[k], i, o, full[k + 1])
    elif head.kind == "dense":
        shapes["head.w"] = (config.out_dim, prod(config.feature_block))
    if head.kind != "none" and head.bias:
        shapes["head.bias"] = (config.out_dim,)
    return shapes


def param_count(config: ModelConfig) -> tuple[dict[str, int], int]:
    """Per-parameter and total trainable scalar counts."""
    counts = {name: prod(shape) for name, shape in param_shapes(config).items()}
    return counts, sum(counts.values())


def init_params(config: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    """Scaled-uniform initialization, biases at zero; deterministic in seed."""
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name.endswith("bias") or name == "b_h":
            values[name] = np.zeros(shape)
            continue
        fan_in = prod(shape[1:]) if len(shape) > 1 else shape[0]
        if name.startswith("head.core"):
            fan_in = shape[0] * shape[1]
        s = fan_in ** -0.5
        values[name] = rng.uniform(-s, s, size=shape)
    return values


def _as_nodes(values: Mapping[str, ad.TapeNode | np.ndarray]) -> dict[str, ad.TapeNode]:
    return {
        name: v if isinstance(v, ad.TapeNode) else ad.constant(np.asarray(v, float))
        for name, v in values.items()
    }


def _flatten_samples(node: ad.TapeNode) -> ad.TapeNode:
    """Per-sample first-mode-fastest flatten of all trailing axes."""
    ndim = len(node.shape)
    perm = (0,) + tuple(range(ndim - 1, 0, -1))
    batch = node.shape[0]
    return ad.reshape(ad.transpose(node, perm), (batch, -1))


def _check_param_shapes(config: ModelConfig, nodes: Mapping[str, ad.TapeNode]) -> None:
    expected = param_shapes(config)
    for name, shape in expected.items():
        if name not in nodes:
            raise ValueError(f"missing parameter {name!r}")
        if nodes[name].shape != shape:
            raise ValueError(
                f"parameter {name!r} has shape {nodes[name].shape}, expected {shape}"
            )


def _head(config: ModelConfig, nodes: Mapping[str, ad.TapeNode], h: ad.TapeNode) -> ad.TapeNode:
    head = config.head
    if head.kind == "none":
        return _flatten_samples(h)
    if head.kind == "dense":
        out = ad.tensordot(_flatten_samples(h), nodes["head.w"], (1,), (1,))
    else:
        # z invariant: (batch, rank, remaining in modes, emitted out modes)
        z = ad.reshape(h, (h.shape[0], 1) + config.in_modes)
        for k in range(3):
            z = ad.tensordot(z, nodes[f"head.core{k}"], (1, 2), (0, 1))
            z = ad.moveaxis(z, -1, 1)
        out = _flatten_samples(z)
    if head.bias:
        out = ad.add_bias(out, nodes["head.bias"])
    return out


def forward(
    config: ModelConfig,
    values: Mapping[str, ad.TapeNode | np.ndarray],
    x: np.ndarray,
) -> ad.TapeNode:
    """Batched forward pass returning (batch, out_dim) predictions or logits."""
    x = np.asarray(x, float)
    if x.ndim != 4 or x.shape[1:] != (config.tau, config.d_phys, config.d_feat):
        raise ValueError(
            f"input must be (batch, {config.tau}, {config.d_phys}, {config.d_feat}), "
            f"got {x.shape}"
        )
    nodes = _as_nodes(values)
    _check_param_shapes(config, nodes)
    act = _TAPE_ACTIVATIONS[config.activation]
    if config.variant == "rnn":
        # flatten physical x feature per step, physical index fastest
        flat = x.transpose(0, 1, 3, 2).reshape(x.shape[0], config.tau, -1)
        h_prev = ad.constant(np.zeros((x.shape[0], config.hidden)))
        steps = []
        for t in range(config.tau):
            z = ad.tensordot(ad.constant(flat[:, t]), nodes["w_x"], (1,), (1,))
            z = ad.add(z, ad.tensordot(h_prev, nodes["w_h"], (1,), (1,)))
            z = ad.add_bias(z, nodes["b_h"])
            h_prev = act(z)
            steps.append(h_prev)
        h = ad.stack_rows(steps, axis=1)
        return _head(config, nodes, h)
    a_asc = build_time_adjacency(config.tau, config.c).ascending().array
    xhat = ad.tensordot(ad.constant(x), nodes["w_x"], (3,), (1,))
    mixed = ad.moveaxis(ad.tensordot(ad.constant(a_asc), xhat, (1,), (1,)), 0, 1)
    if config.variant == "grgtn":
        mixed = ad.tensordot(mixed, nodes["w_r"], (3,), (1,))
    h = act(ad.add(xhat, mixed))
    return _head(config, nodes, h)


def predict(
    config: ModelConfig,
    values: Mapping[str, np.ndarray],
    x: np.ndarray,
) -> np.ndarray:
    """Forward pass without gradient bookkeeping exposed to the caller."""
    return forward(config, values, x).array
