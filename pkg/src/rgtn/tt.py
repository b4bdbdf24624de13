"""Tensor-train decomposition, reconstruction, and compressed linear layers.

A tensor-train network stores an order-N tensor as a chain of N order-3
cores G_n of shape (R_{n-1}, I_n, R_n) with boundary ranks R_0 = R_N = 1.
Entry counts drop from prod(I_n) for the dense tensor to
sum(R_{n-1} I_n R_n) for the chain.

``TTLinearLayer`` uses the same chain to hold a compressed weight matrix:
core n carries the paired extent I_n_in * I_n_out (input index fastest
within the pair), so a matrix of shape (prod in, prod out) never has to be
materialized during the forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .tensor import DenseTensor, Shape, ShapeError, from_array

__all__ = [
    "TTNetwork",
    "TTLinearLayer",
    "tt_svd",
    "tt_reconstruct",
    "tt_param_count",
    "dense_param_count",
    "tt_layer_forward",
]


@dataclass(frozen=True)
class TTNetwork:
    """Chain of order-3 cores linked by matching ranks."""

    cores: tuple[DenseTensor, ...]

    def __post_init__(self) -> None:
        if not self.cores:
            raise ShapeError("a TT network needs at least one core")
        object.__setattr__(self, "cores", tuple(self.cores))
        for i, core in enumerate(self.cores):
            if core.order != 3:
                raise ShapeError(f"core {i} must be order-3, got shape {core.shape}")
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[2] != 1:
            raise ShapeError("boundary ranks must both be 1")
        for i in range(len(self.cores) - 1):
            left, right = self.cores[i].shape[2], self.cores[i + 1].shape[0]
            if left != right:
                raise ShapeError(
                    f"rank mismatch between cores {i} and {i + 1}: {left} vs {right}"
                )

    @property
    def ranks(self) -> tuple[int, ...]:
        return (1,) + tuple(core.shape[2] for core in self.cores)

    @property
    def mode_sizes(self) -> Shape:
        return tuple(core.shape[1] for core in self.cores)


def tt_param_count(tt: TTNetwork) -> int:
    """Total entries stored by the chain: sum of R_{n-1} I_n R_n."""
    return sum(core.size for core in tt.cores)


def dense_param_count(shape: Sequence[int]) -> int:
    """Entries of the dense tensor: product of the mode sizes."""
    return prod(int(d) for d in shape)


def tt_svd(
    x: DenseTensor,
    max_ranks: int | Sequence[int] | None = None,
    rel_tolerance: float | None = None,
) -> TTNetwork:
    """Sequential-SVD tensor-train decomposition.

    With ``rel_tolerance`` t, each unfolding is truncated at threshold
    t * ||x||_F / sqrt(N - 1), which bounds the relative reconstruction
    error by t.  ``max_ranks`` (an int or one cap per interior rank)
    additionally caps the kept ranks.  With neither given the chain is
    exact up to floating-point rounding.
    """
    if x.order < 1:
        raise ShapeError("tt_svd needs an order >= 1 tensor")
    if not np.all(np.isfinite(x.array)):
        raise ValueError("tt_svd input contains non-finite entries")
    dims = x.shape
    n = len(dims)
    if max_ranks is None:
        caps = [None] * (n - 1)
    elif isinstance(max_ranks, int):
        caps = [max_ranks] * (n - 1)
    else:
        caps = list(max_ranks)
        if len(caps) != n - 1:
            raise ShapeError(f"need {n - 1} interior rank caps, got {len(caps)}")

    tol = 0.0
    if rel_tolerance is not None and n > 1:
        tol = float(rel_tolerance) * float(np.linalg.norm(x.array)) / np.sqrt(n - 1)

    cores: list[DenseTensor] = []
    current = x.array.copy()
    rank = 1
    for k in range(n - 1):
        mat = current.reshape(rank * dims[k], -1, order="F")
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        keep = len(s)
        if tol > 0.0:
            tail = np.cumsum(s[::-1] ** 2)[::-1]
            below = np.nonzero(tail <= tol**2)[0]
            if below.size:
                keep = int(below[0])
        else:
            keep = int(np.count_nonzero(s > 0.0))
        if caps[k] is not None:
            keep = min(keep, int(caps[k]))
        keep = max(keep, 1)
        # Columns kept past the numerical rank carry zero weight; zero them so
        # a zero tensor yields all-zero cores.
        u_kept = u[:, :keep] * (s[:keep] > 0.0)
        cores.append(from_array(u_kept.reshape(rank, dims[k], keep, order="F")))
        current = (s[:keep, None] * vt[:keep]).reshape(
            (keep,) + tuple(dims[k + 1 :]), order="F"
        )
        rank = keep
    cores.append(from_array(current.reshape(rank, dims[-1])[:, :, None]))
    return TTNetwork(tuple(cores))


def tt_reconstruct(tt: TTNetwork) -> DenseTensor:
    """Contract the chain left to right back into a dense tensor."""
    result = tt.cores[0].array
    for core in tt.cores[1:]:
        result = np.tensordot(result, core.array, axes=(result.ndim - 1, 0))
    return from_array(result[0, ..., 0])


def _paired_core(core: DenseTensor, in_size: int, out_size: int) -> np.ndarray:
    r0, mid, r1 = core.shape
    if mid != in_size * out_size:
        raise ShapeError(
            f"core middle extent {mid} does not factor as {in_size} * {out_size}"
        )
    return core.array.reshape(r0, in_size, out_size, r1, order="F")


@dataclass(frozen=True)
class TTLinearLayer:
    """Weight matrix of shape (prod in_shape, prod out_shape) in TT form."""

    tt: TTNetwork
    in_shape: Shape
    out_shape: Shape
    bias: DenseTensor | None = None

    def __post_init__(self) -> None:
        in_dims = tuple(int(d) for d in self.in_shape)
        out_dims = tuple(int(d) for d in self.out_shape)
        object.__setattr__(self, "in_shape", in_dims)
        object.__setattr__(self, "out_shape", out_dims)
        if len(in_dims) != len(out_dims) or len(in_dims) != len(self.tt.cores):
            raise ShapeError("in_shape, out_shape and cores must pair one-to-one")
        for k, core in enumerate(self.tt.cores):
            _paired_core(core, in_dims[k], out_dims[k])
        if self.bias is not None and self.bias.shape != out_dims:
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match out_shape {out_dims}"
            )


def tt_layer_forward(layer: TTLinearLayer, x: DenseTensor) -> DenseTensor:
    """Apply the compressed weight to x without materializing it.

    Equals y = ten(W^T vec(x)) + bias where W is the dense reconstruction
    reshaped to (prod in, prod out).
    """
    if x.shape != layer.in_shape:
        raise ShapeError(f"input shape {x.shape} != layer in_shape {layer.in_shape}")
    # Invariant: z has shape (rank, remaining in modes, emitted out modes).
    z = x.array[None, ...]
    for k, core in enumerate(layer.tt.cores):
        paired = _paired_core(core, layer.in_shape[k], layer.out_shape[k])
        z = np.tensordot(z, paired, axes=([0, 1], [0, 1]))
        z = np.moveaxis(z, -1, 0)
    y = z[0]
    if layer.bias is not None:
        y = y + layer.bias.array
    return from_array(y)
