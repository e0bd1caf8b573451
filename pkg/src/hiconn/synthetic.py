"""Synthetic paired-graph datasets with planted module structure.

Structural graphs are weighted planted-partition samples; morphological
graphs are the max-normalized structural matrix plus symmetric noise, so
the two modalities are coupled but not identical. Class-1 subjects get
their intra-module weights boosted inside a designated subset of modules
(in both modalities, since the boost precedes the morphological
derivation), which is the learnable class signal.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .connectome import (
    MORPHOLOGICAL,
    STRUCTURAL,
    Subject,
    init_node_features,
    normalize_graph,
    save_dataset,
    validate_graph,
)
from .errors import ContractError


@dataclass
class SyntheticSpec:
    n_subjects: int
    n_nodes: int
    n_modules: int
    p_in: float = 0.3
    p_out: float = 0.05
    mu_in: float = 1.0
    mu_out: float = 0.5
    sigma: float = 0.2      # weight noise around the edge means
    delta: float = 1.0      # class effect: intra-module boost for label-1 subjects
    prevalence: float = 0.3
    mc_noise: float = 0.05  # symmetric noise added to the morphological copy

    def __post_init__(self):
        if not 0.0 <= self.p_out < self.p_in <= 1.0:
            raise ContractError(f"need 0 <= p_out < p_in <= 1, got {self.p_out}, {self.p_in}")
        if self.n_subjects < 1 or self.n_nodes < 2 or self.n_modules < 1:
            raise ContractError("n_subjects, n_nodes and n_modules must be positive")
        if self.n_modules > self.n_nodes:
            raise ContractError("more modules than nodes")
        if not 0.0 < self.prevalence < 1.0:
            raise ContractError(f"prevalence must lie in (0, 1), got {self.prevalence}")
        if self.delta < 0.0:
            raise ContractError(f"class effect delta must be >= 0, got {self.delta}")

    def to_dict(self) -> dict:
        return asdict(self)


def planted_membership(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Random near-equal partition of nodes into modules; entry i = module of node i."""
    base, extra = divmod(spec.n_nodes, spec.n_modules)
    sizes = [base + (k < extra) for k in range(spec.n_modules)]
    membership = np.repeat(np.arange(spec.n_modules), sizes)
    return membership[rng.permutation(spec.n_nodes)]


def _structural_matrix(spec: SyntheticSpec, membership: np.ndarray,
                       boosted: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = spec.n_nodes
    a = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            same = membership[i] == membership[j]
            if rng.random() >= (spec.p_in if same else spec.p_out):
                continue
            w = abs(rng.normal(spec.mu_in if same else spec.mu_out, spec.sigma))
            if same and boosted[membership[i]]:
                w *= 1.0 + spec.delta
            a[i, j] = a[j, i] = w
    return a


def _morphological_matrix(sc: np.ndarray, spec: SyntheticSpec,
                          rng: np.random.Generator) -> np.ndarray:
    n = sc.shape[0]
    peak = sc.max()
    base = sc / peak if peak > 0 else sc.copy()
    noise = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    noise[iu] = rng.normal(0.0, spec.mc_noise, size=len(iu[0]))
    noise += noise.T
    mc = np.clip(base + noise, 0.0, None)
    np.fill_diagonal(mc, 0.0)
    return mc


def sample_subject(spec: SyntheticSpec, subject_id: str, label: int,
                   rng: np.random.Generator) -> Subject:
    """Draw one paired subject; label 1 receives the boosted designated modules."""
    membership = planted_membership(spec, rng)
    n_affected = max(1, spec.n_modules // 2)
    boosted = np.zeros(spec.n_modules, dtype=bool)
    if label == 1:
        boosted[:n_affected] = True
    sc = _structural_matrix(spec, membership, boosted, rng)
    mc = _morphological_matrix(sc, spec, rng)
    g_s = init_node_features(normalize_graph(validate_graph(sc, STRUCTURAL)))
    g_m = init_node_features(normalize_graph(validate_graph(mc, MORPHOLOGICAL)))
    return Subject(subject_id, g_s, g_m, label)


def sample_dataset(spec: SyntheticSpec, seed: int) -> list:
    """Deterministic subject list; per-subject RNG substreams keep runs stable."""
    n_pos = int(round(spec.n_subjects * spec.prevalence))
    labels = [1] * n_pos + [0] * (spec.n_subjects - n_pos)
    width = max(3, len(str(spec.n_subjects - 1)))
    children = np.random.SeedSequence(seed).spawn(spec.n_subjects)
    subjects = []
    for idx, (label, child) in enumerate(zip(labels, children)):
        sid = f"sub{idx:0{width}d}"
        subjects.append(sample_subject(spec, sid, label, np.random.default_rng(child)))
    return subjects


def generate_synthetic(spec: SyntheticSpec, seed: int, out_dir) -> Path:
    """Write a full dataset (manifest + matrices) plus a generation record."""
    subjects = sample_dataset(spec, seed)
    manifest_path = save_dataset(subjects, out_dir, atlas_size=spec.n_nodes)
    record = {"seed": int(seed), "spec": spec.to_dict()}
    (Path(out_dir) / "generation.json").write_text(
        json.dumps(record, indent=2) + "\n", encoding="utf-8")
    return manifest_path
