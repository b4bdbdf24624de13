"""Recurrent graph filtering layers and the vanilla RNN baseline.

The window recurrence h_t = c W_r h_{t-1} + W_x x_t with an idempotent
propagation matrix W_r collapses into a single multi-linear map: the
block matrix I + A (x) W_r, where A is the time adjacency with entries
c^p.  Tensorized to order 4, that map filters all hidden states of a
window at once through one double contraction.

The general variant (grgtn) keeps W_r trainable; the simplified variant
(srgtn) fixes W_r = I, which reduces the filtering to the two-tap spatial
graph filter (I + A) applied to the projected inputs.

All sequence matrices here are stacked in ascending time order and the
coupling acts through the ascending (strictly lower triangular) view of
the time adjacency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import TimeGraph
from .tensor import DenseTensor, ShapeError, from_array

__all__ = [
    "ACTIVATIONS",
    "RNNParams",
    "RecurrentCoupling",
    "RGTNLayerSpec",
    "RGTNLayerParams",
    "rnn_forward",
    "rnn_output",
    "build_block_r",
    "build_coupling",
    "grgtn_filter",
    "srgtn_filter",
    "layer_forward",
    "MATERIALIZE_LIMIT",
]

# Above this tau * M the order-4 coupling tensor is not materialized and the
# equivalent blockwise form is used instead.
MATERIALIZE_LIMIT = 4096


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


ACTIVATIONS = {
    "tanh": np.tanh,
    "sigmoid": lambda z: 1.0 / (1.0 + np.exp(-z)),
    "relu": lambda z: np.maximum(z, 0.0),
    "identity": lambda z: z,
    "softmax": _softmax_rows,
}


def _activation(name: str):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


@dataclass(frozen=True)
class RNNParams:
    """Weights of a single vanilla recurrent layer plus its output head."""

    w_h: DenseTensor
    w_x: DenseTensor
    w_y: DenseTensor
    b_h: DenseTensor | None = None
    b_y: DenseTensor | None = None
    hidden_activation: str = "tanh"
    output_activation: str = "identity"

    def __post_init__(self) -> None:
        m = self.w_h.shape[0]
        if self.w_h.shape != (m, m):
            raise ShapeError(f"w_h must be square, got {self.w_h.shape}")
        if self.w_x.order != 2 or self.w_x.shape[0] != m:
            raise ShapeError(f"w_x must be ({m}, N), got {self.w_x.shape}")
        if self.w_y.order != 2 or self.w_y.shape[1] != m:
            raise ShapeError(f"w_y must be (P, {m}), got {self.w_y.shape}")
        if self.b_h is not None and self.b_h.shape != (m,):
            raise ShapeError(f"b_h must be ({m},), got {self.b_h.shape}")
        if self.b_y is not None and self.b_y.shape != (self.w_y.shape[0],):
            raise ShapeError(f"b_y must match w_y rows, got {self.b_y.shape}")
        _activation(self.hidden_activation)
        _activation(self.output_activation)


def rnn_forward(
    params: RNNParams, x: DenseTensor, h0: DenseTensor | None = None
) -> DenseTensor:
    """Hidden states of the recurrence, one row per time step (ascending)."""
    m, n = params.w_x.shape
    if x.order != 2 or x.shape[1] != n:
        raise ShapeError(f"input must be (tau, {n}), got {x.shape}")
    if h0 is None:
        h = np.zeros(m)
    else:
        if h0.shape != (m,):
            raise ShapeError(f"h0 must be ({m},), got {h0.shape}")
        h = h0.array.copy()
    act = _activation(params.hidden_activation)
    bias = params.b_h.array if params.b_h is not None else 0.0
    rows = []
    for t in range(x.shape[0]):
        h = act(params.w_h.array @ h + params.w_x.array @ x.array[t] + bias)
        rows.append(h)
    return from_array(np.stack(rows, axis=0))


def rnn_output(params: RNNParams, h: DenseTensor) -> DenseTensor:
    """Per-step outputs from the hidden states."""
    p, m = params.w_y.shape
    if h.order != 2 or h.shape[1] != m:
        raise ShapeError(f"hidden states must be (tau, {m}), got {h.shape}")
    act = _activation(params.output_activation)
    z = h.array @ params.w_y.array.T
    if params.b_y is not None:
        z = z + params.b_y.array
    return from_array(act(z))


def build_block_r(w_h: DenseTensor, tau: int) -> DenseTensor:
    """Block-triangular window map: block (t, s) is w_h^(t-s) for t >= s."""
    if w_h.order != 2 or w_h.shape[0] != w_h.shape[1]:
        raise ShapeError(f"w_h must be square, got {w_h.shape}")
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    m = w_h.shape[0]
    out = np.zeros((tau * m, tau * m))
    powers = [np.eye(m)]
    for _ in range(tau - 1):
        powers.append(w_h.array @ powers[-1])
    for t in range(tau):
        for s in range(t + 1):
            out[t * m : (t + 1) * m, s * m : (s + 1) * m] = powers[t - s]
    return from_array(out)


@dataclass
class RecurrentCoupling:
    """Time adjacency paired with the propagation matrix W_r.

    The order-4 coupling tensor has entries
    delta(t, s) delta(m, k) + A_asc[t, s] * W_r[m, k] at (t, m, s, k);
    it is materialized lazily and only below :data:`MATERIALIZE_LIMIT`.
    """

    time_graph: TimeGraph
    w_r: DenseTensor
    _materialized: DenseTensor | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.w_r.order != 2 or self.w_r.shape[0] != self.w_r.shape[1]:
            raise ShapeError(f"w_r must be square, got {self.w_r.shape}")

    @property
    def tau(self) -> int:
        return self.time_graph.tau

    @property
    def hidden_size(self) -> int:
        return self.w_r.shape[0]

    def materialize(self) -> DenseTensor:
        """Order-4 tensorization of I + A (x) W_r.

        The rank-major reshape plus mode-pair swap puts the tensor in
        (tau, M, tau, M) layout so that contracting its last two modes
        against an ascending-time (tau, M) matrix applies the block map.
        """
        if self._materialized is None:
            tau, m = self.tau, self.hidden_size
            a_asc = self.time_graph.ascending().array
            r = np.eye(tau * m) + np.kron(a_asc, self.w_r.array)
            r4 = r.reshape(m, tau, m, tau, order="F").transpose(1, 0, 3, 2)
            self._materialized = from_array(r4)
        return self._materialized

    @property
    def materialized(self) -> DenseTensor | None:
        return self._materialized


def build_coupling(tg: TimeGraph, w_r: DenseTensor) -> RecurrentCoupling:
    return RecurrentCoupling(time_graph=tg, w_r=w_r)


def _project_inputs(x: DenseTensor, w_x: DenseTensor, tau: int) -> np.ndarray:
    if w_x.order != 2:
        raise ShapeError(f"w_x must be a matrix, got shape {w_x.shape}")
    if x.order != 2 or x.shape != (tau, w_x.shape[1]):
        raise ShapeError(
            f"input must be ({tau}, {w_x.shape[1]}), got {x.shape}"
        )
    return x.array @ w_x.array.T


def grgtn_filter(
    coupling: RecurrentCoupling, x: DenseTensor, w_x: DenseTensor
) -> DenseTensor:
    """All hidden states of the window through the coupling tensor.

    Equals the unrolled recurrence h_t = c W_r h_{t-1} + W_x x_t whenever
    W_r is idempotent; for general W_r it is the block map itself.
    """
    if w_x.shape[0] != coupling.hidden_size:
        raise ShapeError(
            f"w_x rows ({w_x.shape[0]}) must match hidden size {coupling.hidden_size}"
        )
    xhat = _project_inputs(x, w_x, coupling.tau)
    if coupling.tau * coupling.hidden_size <= MATERIALIZE_LIMIT:
        from .tensor import contract_multi

        r4 = coupling.materialize()
        return contract_multi(r4, from_array(xhat), (3, 4), (1, 2))
    a_asc = coupling.time_graph.ascending().array
    return from_array(xhat + a_asc @ xhat @ coupling.w_r.array.T)


def srgtn_filter(tg: TimeGraph, x: DenseTensor, w_x: DenseTensor) -> DenseTensor:
    """Simplified filtering: the two-tap filter (I + A) on projected inputs."""
    xhat = _project_inputs(x, w_x, tg.tau)
    a_asc = tg.ascending().array
    return from_array(xhat + a_asc @ xhat)


@dataclass(frozen=True)
class RGTNLayerSpec:
    """Configuration of one filtering layer."""

    variant: str  # "general" | "simplified"
    tau: int
    hidden_size: int
    in_features: int
    c: float = 0.5
    activation: str | None = None

    def __post_init__(self) -> None:
        if self.variant not in ("general", "simplified"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.activation is not None:
            _activation(self.activation)


@dataclass(frozen=True)
class RGTNLayerParams:
    w_x: DenseTensor
    w_r: DenseTensor | None = None


def layer_forward(
    spec: RGTNLayerSpec, params: RGTNLayerParams, x: DenseTensor
) -> DenseTensor:
    """Dispatch to the configured filter and apply the optional activation."""
    from .graph import build_time_adjacency

    if params.w_x.shape != (spec.hidden_size, spec.in_features):
        raise ShapeError(
            f"w_x must be ({spec.hidden_size}, {spec.in_features}), got {params.w_x.shape}"
        )
    tg = build_time_adjacency(spec.tau, spec.c)
    if spec.variant == "general":
        if params.w_r is None:
            raise ShapeError("general variant needs w_r")
        h = grgtn_filter(build_coupling(tg, params.w_r), x, params.w_x)
    else:
        if params.w_r is not None:
            raise ShapeError("simplified variant takes no w_r")
        h = srgtn_filter(tg, x, params.w_x)
    if spec.activation is None:
        return h
    return from_array(_activation(spec.activation)(h.array))
