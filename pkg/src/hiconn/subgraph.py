"""Learned regional subgraph extraction, consistent across both modalities.

For every center node the one-hop neighborhoods of both graphs are pooled,
neighbors are scored by a learnable linear projection of their features
followed by a softmax per modality, and the top-k neighbors by averaged
score are kept. The hard selection is not differentiable, so the selected
neighbors' feature rows are scaled by their score; the scorer trains
through that path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    Tensor,
    concat_rows,
    gather_rows,
    matmul,
    mul,
    scale,
    scatter_rows,
    softmax_rows,
    transpose,
)
from .connectome import ConnectomeGraph, Subject


@dataclass
class NeighborScorer:
    """Linear neighbor-scoring head: feature row -> logit."""

    weight: Tensor  # (d, 1)
    k: int = 5


@dataclass
class SubgraphView:
    """One modality's induced subgraph plus its message-passing operator."""

    adjacency: np.ndarray    # induced working adjacency
    prop_matrix: np.ndarray  # symmetric-normalized adjacency with self-loops
    features: Tensor         # node feature rows, score-scaled where learned


@dataclass
class RegionalSubgraphPair:
    """Paired induced subgraphs around one center node, same node order."""

    center: int
    node_set: np.ndarray  # center first, then selected neighbors ascending
    structural: SubgraphView
    morphological: SubgraphView


def propagation_matrix(a: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization of a + I; well defined for isolated nodes."""
    a_hat = a + np.eye(a.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def induced_view(g: ConnectomeGraph, node_set: np.ndarray,
                 row_factors: Tensor | None = None) -> SubgraphView:
    """Slice adjacency and feature rows; optionally scale rows by score factors."""
    sub_a = g.adjacency[np.ix_(node_set, node_set)]
    feats = Tensor(g.features[node_set])
    if row_factors is not None:
        ones_row = Tensor(np.ones((1, g.features.shape[1])))
        feats = mul(matmul(row_factors, ones_row), feats)
    return SubgraphView(adjacency=sub_a, prop_matrix=propagation_matrix(sub_a),
                        features=feats)


def score_neighbors(g: ConnectomeGraph, i: int, scorer: NeighborScorer) -> Tensor:
    """Softmax scores over the one-hop neighbors of node i, in neighbor order.

    Returns a (degree x 1) tensor; isolated nodes yield an empty (0 x 1)
    score set for the caller to handle.
    """
    nbrs = g.neighbors(i)
    if nbrs.size == 0:
        return Tensor(np.zeros((0, 1)))
    logits = matmul(Tensor(g.features[nbrs]), scorer.weight)
    return transpose(softmax_rows(transpose(logits)))


def extract_regional_pair(subject: Subject, i: int, scorer_s: NeighborScorer,
                          scorer_mor: NeighborScorer, k: int) -> RegionalSubgraphPair:
    """Select the center plus top-k neighbors by mean modality score.

    Scores are averaged over the union of both one-hop neighborhoods; a
    node absent from one modality's neighborhood contributes zero there.
    Ties break toward the lower node index. Nodes isolated in both
    modalities produce a singleton subgraph.
    """
    g_s, g_m = subject.structural, subject.morphological
    nbr_s, nbr_m = g_s.neighbors(i), g_m.neighbors(i)
    union = np.union1d(nbr_s, nbr_m)
    if union.size == 0:
        node_set = np.array([i], dtype=np.intp)
        return RegionalSubgraphPair(
            center=i, node_set=node_set,
            structural=induced_view(g_s, node_set),
            morphological=induced_view(g_m, node_set),
        )

    u = union.size
    padded = []
    for g, nbrs, scorer in ((g_s, nbr_s, scorer_s), (g_m, nbr_m, scorer_mor)):
        if nbrs.size == 0:
            padded.append(Tensor(np.zeros((u, 1))))
        else:
            scores = score_neighbors(g, i, scorer)
            padded.append(scatter_rows(scores, np.searchsorted(union, nbrs), u))
    combined = scale(padded[0] + padded[1], 0.5)

    if u <= k:
        sel = np.arange(u, dtype=np.intp)
    else:
        values = combined.values[:, 0]
        order = np.lexsort((union, -values))
        sel = np.sort(order[:k])
    node_set = np.concatenate(([i], union[sel])).astype(np.intp)

    factors = concat_rows(Tensor([[1.0]]), gather_rows(combined, sel))
    return RegionalSubgraphPair(
        center=i, node_set=node_set,
        structural=induced_view(g_s, node_set, factors),
        morphological=induced_view(g_m, node_set, factors),
    )
