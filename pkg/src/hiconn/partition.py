"""Per-subject soft module assignment, thresholded partitions, modularity loss.

A single message-passing layer over the morphological graph maps regional
embeddings to a row-stochastic assignment matrix. Hard module membership
(entries above a threshold, with an argmax fallback so every node lands
somewhere) decides which modular subgraphs are built; the assignment
itself is trained by maximizing a two-modality Newman modularity score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, matmul, mul, scale, softmax_rows, sum_axis
from .connectome import ConnectomeGraph, Subject
from .errors import ContractError
from .subgraph import SubgraphView, induced_view, propagation_matrix


@dataclass
class AssignmentNetwork:
    """One message-passing layer: regional embeddings -> module logits."""

    weight: Tensor  # (d, K)


@dataclass
class ModularPartition:
    """Thresholded soft assignment with the fallback rule applied.

    ``modules[k]`` holds the sorted node indices whose assignment exceeds
    the threshold in column k (overlap allowed), plus any argmax-fallback
    nodes; ``retained`` lists the non-empty modules, which are the only
    ones used downstream.
    """

    assignment: np.ndarray  # (N, K) row-stochastic values
    threshold: float
    modules: list
    retained: list

    def covered_nodes(self) -> set:
        out = set()
        for k in self.retained:
            out.update(int(i) for i in self.modules[k])
        return out

    def to_json(self, subject_id: str) -> dict:
        return {
            "subject": subject_id,
            "threshold": self.threshold,
            "modules": [[int(i) for i in self.modules[k]] for k in self.retained],
        }


@dataclass
class ModularSubgraphPair:
    """Paired induced subgraphs of one retained module, same node order."""

    module_index: int
    node_set: np.ndarray
    structural: SubgraphView
    morphological: SubgraphView


def compute_assignment(z_r: Tensor, g_mor: ConnectomeGraph,
                       net: AssignmentNetwork) -> Tensor:
    """Row-softmax of one message-passing layer over the morphological graph."""
    n = g_mor.n_nodes
    if z_r.shape[0] != n:
        raise ContractError(f"{z_r.shape[0]} embedding rows for {n} nodes")
    if z_r.shape[1] != net.weight.shape[0]:
        raise ContractError(
            f"assignment weight expects {net.weight.shape[0]}-dim rows, got {z_r.shape[1]}"
        )
    prop = propagation_matrix(g_mor.adjacency)
    return softmax_rows(matmul(prop, matmul(z_r, net.weight)))


def threshold_partition(s_values: np.ndarray, threshold: float) -> ModularPartition:
    """Hard membership where assignment exceeds the threshold.

    Overlapping membership is allowed. A node exceeding the threshold
    nowhere joins its argmax module (ties: lowest module index); modules
    left empty are dropped from downstream computation.
    """
    s = np.asarray(s_values, dtype=np.float64)
    member = s > threshold
    uncovered = ~member.any(axis=1)
    if uncovered.any():
        member[np.flatnonzero(uncovered), s[uncovered].argmax(axis=1)] = True
    modules = [np.flatnonzero(member[:, k]) for k in range(s.shape[1])]
    retained = [k for k, m in enumerate(modules) if m.size > 0]
    return ModularPartition(assignment=s, threshold=float(threshold),
                            modules=modules, retained=retained)


def build_modular_pairs(subject: Subject, partition: ModularPartition) -> list:
    """Induced subgraph pairs for every retained module."""
    pairs = []
    for k in partition.retained:
        node_set = partition.modules[k].astype(np.intp)
        pairs.append(ModularSubgraphPair(
            module_index=k, node_set=node_set,
            structural=induced_view(subject.structural, node_set),
            morphological=induced_view(subject.morphological, node_set),
        ))
    return pairs


def modularity(s, a: np.ndarray) -> Tensor:
    """Soft Newman modularity of assignment s on weighted adjacency a.

    q = (1 / 2w) Tr(S^T (A - b b^T / 2w) S) with b the degree vector and
    2w the total weight sum; defined as 0 on empty graphs.
    """
    a = np.asarray(a, dtype=np.float64)
    total = float(a.sum())  # equals 2w
    if total <= 0.0:
        return Tensor(0.0)
    b = a.sum(axis=1)
    mod_matrix = a - np.outer(b, b) / total
    s = s if isinstance(s, Tensor) else Tensor(s)
    return scale(sum_axis(mul(s, matmul(mod_matrix, s))), 1.0 / total)


def modularity_loss(s, subject: Subject) -> Tensor:
    """Negated modularity summed over both modalities, sharing one assignment."""
    q_s = modularity(s, subject.structural.adjacency)
    q_m = modularity(s, subject.morphological.adjacency)
    return scale(q_s + q_m, -1.0)
