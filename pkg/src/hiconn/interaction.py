"""Siamese graph encoding with cross-modal attention over paired subgraphs.

One encoder (a single shared parameter set) embeds both modalities of a
subgraph pair; morphological embeddings then query structural keys and
values, so every fused row is a convex combination of projected
structural rows. Pooling yields either the center node's fused row
(regional use) or the mean fused row (modular use).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    gather_rows,
    matmul,
    mean_axis,
    relu,
    reshape,
    scale,
    softmax_rows,
    transpose,
)
from .errors import ContractError
from .subgraph import SubgraphView

POOL_CENTER = "center_row"
POOL_MEAN = "mean"


@dataclass
class SiameseEncoder:
    """Two message-passing layers with one parameter set for both modalities."""

    w1: Tensor  # (d_in, d)
    w2: Tensor  # (d, d)


@dataclass
class CrossModalAttention:
    """Single-head projections; queries come from the morphological branch."""

    wq: Tensor  # (d, d)
    wk: Tensor  # (d, d)
    wv: Tensor  # (d, d)


def encode(view: SubgraphView, encoder: SiameseEncoder) -> Tensor:
    """Two rounds of H <- ReLU(A_hat (H W)) over the subgraph."""
    x = view.features
    if x.shape[1] != encoder.w1.shape[0]:
        raise ContractError(
            f"encoder expects {encoder.w1.shape[0]}-dim features, subgraph has {x.shape[1]}"
        )
    h = relu(matmul(view.prop_matrix, matmul(x, encoder.w1)))
    return relu(matmul(view.prop_matrix, matmul(h, encoder.w2)))


def cross_attention(z_s: Tensor, z_mor: Tensor, attn: CrossModalAttention,
                    return_weights: bool = False):
    """Fuse the pair: softmax(Q K^T / sqrt(d_k)) V with Q from z_mor, K and V from z_s."""
    if z_s.shape != z_mor.shape:
        raise ContractError(f"attention inputs differ in shape: {z_s.shape} vs {z_mor.shape}")
    d_k = attn.wk.shape[0]
    q = matmul(z_mor, transpose(attn.wq))
    k = matmul(z_s, transpose(attn.wk))
    v = matmul(z_s, transpose(attn.wv))
    weights = softmax_rows(scale(matmul(q, transpose(k)), 1.0 / math.sqrt(d_k)))
    fused = matmul(weights, v)
    if return_weights:
        return fused, weights
    return fused


def mim_forward(pair, encoder: SiameseEncoder, attn: CrossModalAttention | None,
                pool: str = POOL_CENTER) -> Tensor:
    """Encode both modalities with shared weights, fuse, pool to a (1 x d) row.

    With ``attn=None`` the fusion degrades to the elementwise mean of the
    two embeddings (the ablation variant without cross-modal attention).
    """
    z_s = encode(pair.structural, encoder)
    z_mor = encode(pair.morphological, encoder)
    if attn is None:
        fused = scale(z_s + z_mor, 0.5)
    else:
        fused = cross_attention(z_s, z_mor, attn)
    if pool == POOL_CENTER:
        return gather_rows(fused, np.array([0]))
    if pool == POOL_MEAN:
        return reshape(mean_axis(fused, 0), (1, fused.shape[1]))
    raise ContractError(f"unknown pooling mode {pool!r}")
