"""Soft-threshold purification of regional features and cross-scale fusion.

Modular representations are broadcast back to regions through the retained
assignment columns and two feature-space linear layers. Pooled magnitudes
of that reconstruction set a per-feature threshold, scaled into (0, 1) by
a sigmoid gate, which soft-thresholds the regional representations before
both scales are averaged into one global vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    absval,
    concat_rows,
    div,
    gather_cols,
    global_average_pool,
    matmul,
    mean_axis,
    mul,
    relu,
    reshape,
    sigmoid,
    soft_threshold,
    sum_axis,
)
from .errors import ContractError


@dataclass
class FusionHead:
    """Learnable pieces of the fusion stage."""

    up1: Tensor          # (d, d)
    up2: Tensor          # (d, d)
    gate_weight: Tensor  # (d, d)
    gate_bias: Tensor    # (1, d)


def retained_assignment(s: Tensor, retained) -> Tensor:
    """Keep the retained module columns and renormalize rows to sum to 1."""
    if len(retained) == 0:
        raise ContractError("no retained modules to upsample from")
    cols = gather_cols(s, np.asarray(retained, dtype=np.intp))
    sums = reshape(sum_axis(cols, 1), (cols.shape[0], 1))
    return div(cols, matmul(sums, Tensor(np.ones((1, cols.shape[1])))))


def upsample_modular(z_m: Tensor, s_retained: Tensor, head: FusionHead) -> Tensor:
    """Assignment-weighted broadcast of module vectors, then two linear layers."""
    if s_retained.shape[1] != z_m.shape[0]:
        raise ContractError(
            f"{s_retained.shape[1]} assignment columns for {z_m.shape[0]} module rows"
        )
    return matmul(relu(matmul(matmul(s_retained, z_m), head.up1)), head.up2)


def compute_threshold(z_m_up: Tensor, head: FusionHead) -> Tensor:
    """Per-feature threshold tau = sigmoid(gate(T)) * T, T = column mean magnitude."""
    d = z_m_up.shape[1]
    t_row = reshape(global_average_pool(absval(z_m_up)), (1, d))
    a = sigmoid(matmul(t_row, head.gate_weight) + head.gate_bias)
    return mul(a, t_row)


def fuse_global(z_r: Tensor, z_m: Tensor) -> Tensor:
    """Row-concatenate both scales and average into a single (1 x d) vector."""
    if z_r.shape[1] != z_m.shape[1]:
        raise ContractError(f"feature dims differ: {z_r.shape[1]} vs {z_m.shape[1]}")
    stacked = concat_rows(z_r, z_m)
    return reshape(mean_axis(stacked, 0), (1, z_r.shape[1]))


def fuse(z_r: Tensor, z_m: Tensor, s_retained: Tensor, head: FusionHead):
    """Full purification chain; returns (global vector, threshold, purified z_r)."""
    z_up = upsample_modular(z_m, s_retained, head)
    tau = compute_threshold(z_up, head)
    z_r_pure = soft_threshold(z_r, tau)
    return fuse_global(z_r_pure, z_m), tau, z_r_pure
