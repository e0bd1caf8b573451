"""Hierarchical multimodal brain-graph classification.

A small dense-tensor engine with reverse-mode differentiation underpins a
trainable pipeline: Siamese graph encoding with cross-modal attention,
learned per-subject modular partitions driven by a Newman modularity
objective, and soft-threshold multiscale fusion feeding a binary
classifier. The :class:`ConnectomeClassifier` estimator is the high-level
entry point; the ``hiconn`` CLI covers dataset generation, training,
evaluation, gradient checking and ablations.
"""

from .autodiff import Tape, Tensor, backward
from .config import TrainConfig
from .connectome import (
    ConnectomeGraph,
    DatasetSplit,
    Subject,
    init_node_features,
    load_dataset,
    save_dataset,
    stratified_split,
    validate_graph,
)
from .estimator import ConnectomeClassifier
from .metrics import Metrics, compute_metrics
from .model import Model, VARIANTS
from .optim import Adam, AdamState, adam_step
from .synthetic import SyntheticSpec, generate_synthetic
from .training import RunRecord, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AdamState",
    "ConnectomeClassifier",
    "ConnectomeGraph",
    "DatasetSplit",
    "Metrics",
    "Model",
    "RunRecord",
    "Subject",
    "SyntheticSpec",
    "Tape",
    "Tensor",
    "TrainConfig",
    "VARIANTS",
    "adam_step",
    "backward",
    "compute_metrics",
    "evaluate",
    "generate_synthetic",
    "init_node_features",
    "load_dataset",
    "save_dataset",
    "stratified_split",
    "train",
    "validate_graph",
]
