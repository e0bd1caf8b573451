"""End-to-end assembly: extraction, two interaction stages, partition, fusion, classifier.

The forward pass per subject: score and slice a regional subgraph pair
around every node, fuse each pair into a regional embedding row, derive a
per-subject module partition from those rows, fuse each retained module's
subgraph pair into a modular embedding row, purify the regional scale with
the modular threshold, and classify the pooled global vector. Ablation
variants degrade exactly one stage and leave the rest untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat_rows, matmul, relu
from .config import TrainConfig
from .connectome import Subject
from .errors import ContractError
from .fusion import FusionHead, fuse, fuse_global, retained_assignment
from .interaction import CrossModalAttention, SiameseEncoder, mim_forward, POOL_CENTER, POOL_MEAN
from .partition import (
    AssignmentNetwork,
    ModularPartition,
    build_modular_pairs,
    compute_assignment,
    modularity_loss,
    threshold_partition,
)
from .subgraph import NeighborScorer, extract_regional_pair

VARIANT_FULL = "full"
VARIANT_NO_ATTENTION = "no-attention"      # cross-attention -> elementwise mean
VARIANT_FIXED_PARTITION = "fixed-partition"  # contiguous equal modules, no modularity loss
VARIANT_NO_THRESHOLD = "no-threshold"      # plain mean fusion, no purification
VARIANTS = (VARIANT_FULL, VARIANT_NO_ATTENTION, VARIANT_FIXED_PARTITION, VARIANT_NO_THRESHOLD)


@dataclass
class ForwardResult:
    logits: Tensor               # (1, 2)
    z_global: Tensor             # (1, d)
    z_regional: Tensor           # (N, d)
    z_modular: Tensor            # (K', d)
    partition: ModularPartition
    modularity_loss: Tensor      # scalar
    assignment: Tensor | None    # (N, K) tensor, None for the fixed partition
    tau: Tensor | None           # (1, d) threshold, None when purification is off
    diagnostics: dict = field(default_factory=dict)


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, shape or (fan_in, fan_out)),
                  requires_grad=True)


def fixed_partition(n_nodes: int, n_modules: int, threshold: float) -> ModularPartition:
    """Contiguous near-equal node blocks; the learned-partition ablation."""
    bounds = np.linspace(0, n_nodes, n_modules + 1).round().astype(int)
    modules = [np.arange(bounds[k], bounds[k + 1], dtype=np.intp) for k in range(n_modules)]
    assignment = np.zeros((n_nodes, n_modules))
    for k, m in enumerate(modules):
        assignment[m, k] = 1.0
    retained = [k for k, m in enumerate(modules) if m.size > 0]
    return ModularPartition(assignment=assignment, threshold=float(threshold),
                            modules=modules, retained=retained)


class Model:
    """All learnable state plus the variant-aware forward pass."""

    def __init__(self, n_nodes: int, config: TrainConfig, variant: str = VARIANT_FULL):
        if variant not in VARIANTS:
            raise ContractError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
        if config.neighbor_budget >= n_nodes:
            raise ContractError(
                f"neighbor budget {config.neighbor_budget} must be below node count {n_nodes}"
            )
        self.n_nodes = n_nodes
        self.config = config
        self.variant = variant
        d = config.embed_dim
        k_mod = config.modules
        hidden = config.classifier_hidden

        rng = np.random.default_rng(config.seed)
        self.scorer_s = NeighborScorer(_glorot(rng, n_nodes, 1), k=config.neighbor_budget)
        self.scorer_mor = NeighborScorer(_glorot(rng, n_nodes, 1), k=config.neighbor_budget)
        self.regional_encoder = SiameseEncoder(_glorot(rng, n_nodes, d), _glorot(rng, d, d))
        self.regional_attention = CrossModalAttention(
            _glorot(rng, d, d), _glorot(rng, d, d), _glorot(rng, d, d))
        self.modular_encoder = SiameseEncoder(_glorot(rng, n_nodes, d), _glorot(rng, d, d))
        self.modular_attention = CrossModalAttention(
            _glorot(rng, d, d), _glorot(rng, d, d), _glorot(rng, d, d))
        self.assignment_net = AssignmentNetwork(_glorot(rng, d, k_mod))
        self.fusion = FusionHead(
            up1=_glorot(rng, d, d), up2=_glorot(rng, d, d),
            gate_weight=_glorot(rng, d, d),
            gate_bias=Tensor(np.zeros((1, d)), requires_grad=True),
        )
        self.clf_w1 = _glorot(rng, d, hidden)
        self.clf_b1 = Tensor(np.zeros((1, hidden)), requires_grad=True)
        self.clf_w2 = _glorot(rng, hidden, 2)
        self.clf_b2 = Tensor(np.zeros((1, 2)), requires_grad=True)

    def parameters(self) -> dict:
        return {
            "scorer_s": self.scorer_s.weight,
            "scorer_mor": self.scorer_mor.weight,
            "regional_encoder_w1": self.regional_encoder.w1,
            "regional_encoder_w2": self.regional_encoder.w2,
            "regional_attention_wq": self.regional_attention.wq,
            "regional_attention_wk": self.regional_attention.wk,
            "regional_attention_wv": self.regional_attention.wv,
            "modular_encoder_w1": self.modular_encoder.w1,
            "modular_encoder_w2": self.modular_encoder.w2,
            "modular_attention_wq": self.modular_attention.wq,
            "modular_attention_wk": self.modular_attention.wk,
            "modular_attention_wv": self.modular_attention.wv,
            "assignment_weight": self.assignment_net.weight,
            "fusion_up1": self.fusion.up1,
            "fusion_up2": self.fusion.up2,
            "fusion_gate_weight": self.fusion.gate_weight,
            "fusion_gate_bias": self.fusion.gate_bias,
            "clf_w1": self.clf_w1,
            "clf_b1": self.clf_b1,
            "clf_w2": self.clf_w2,
            "clf_b2": self.clf_b2,
        }

    def state_dict(self) -> dict:
        return {name: p.values.copy() for name, p in self.parameters().items()}

    def load_state(self, state: dict) -> None:
        params = self.parameters()
        for name, p in params.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != p.values.shape:
                raise ContractError(
                    f"parameter {name}: stored shape {values.shape} != expected {p.values.shape}"
                )
            p.values = np.ascontiguousarray(values)

    def forward(self, subject: Subject) -> ForwardResult:
        if subject.n_nodes != self.n_nodes:
            raise ContractError(
                f"model built for {self.n_nodes} nodes, subject has {subject.n_nodes}"
            )
        cfg = self.config
        reg_attn = None if self.variant == VARIANT_NO_ATTENTION else self.regional_attention
        mod_attn = None if self.variant == VARIANT_NO_ATTENTION else self.modular_attention

        rows = []
        for i in range(self.n_nodes):
            pair = extract_regional_pair(subject, i, self.scorer_s, self.scorer_mor,
                                         cfg.neighbor_budget)
            rows.append(mim_forward(pair, self.regional_encoder, reg_attn, POOL_CENTER))
        z_regional = concat_rows(*rows)

        if self.variant == VARIANT_FIXED_PARTITION:
            partition = fixed_partition(self.n_nodes, cfg.modules, cfg.threshold)
            assignment = None
            s_for_fusion = Tensor(partition.assignment)
            l_q = Tensor(0.0)
        else:
            assignment = compute_assignment(z_regional, subject.morphological,
                                            self.assignment_net)
            partition = threshold_partition(assignment.values, cfg.threshold)
            s_for_fusion = assignment
            l_q = modularity_loss(assignment, subject)

        pairs = build_modular_pairs(subject, partition)
        z_modular = concat_rows(*[
            mim_forward(pair, self.modular_encoder, mod_attn, POOL_MEAN) for pair in pairs
        ])

        tau = None
        if self.variant == VARIANT_NO_THRESHOLD:
            z_global = fuse_global(z_regional, z_modular)
        else:
            s_retained = retained_assignment(s_for_fusion, partition.retained)
            z_global, tau, _ = fuse(z_regional, z_modular, s_retained, self.fusion)

        hidden = relu(matmul(z_global, self.clf_w1) + self.clf_b1)
        logits = matmul(hidden, self.clf_w2) + self.clf_b2

        return ForwardResult(
            logits=logits, z_global=z_global, z_regional=z_regional,
            z_modular=z_modular, partition=partition, modularity_loss=l_q,
            assignment=assignment, tau=tau,
            diagnostics={
                "n_modules": len(partition.retained),
                "module_sizes": [int(partition.modules[k].size) for k in partition.retained],
            },
        )

    def predict_logits(self, subject: Subject) -> np.ndarray:
        return self.forward(subject).logits.values[0].copy()
