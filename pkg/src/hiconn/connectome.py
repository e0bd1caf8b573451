"""Data model, IO and split logic for paired brain-graph subjects.

Each subject carries two weighted graphs over the same node atlas: a
structural modality (white-matter connectivity) and a morphological
modality (inter-regional similarity of shape features). Matrices are
stored raw for lossless round trips; the model consumes a max-normalized
view so the two modalities live on a comparable scale.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, DataFormatError
from .validation import (
    check_finite,
    check_nonnegative,
    check_square,
    check_symmetric,
    zeroed_diagonal,
)

logger = logging.getLogger(__name__)

STRUCTURAL = "structural"
MORPHOLOGICAL = "morphological"

SPLIT_RATIOS = (0.7, 0.1, 0.2)
PARTITION_NAMES = ("train", "val", "test")


class ConnectomeGraph:
    """One modality's weighted graph: symmetric nonnegative adjacency, zero diagonal.

    ``adjacency`` is the working matrix (normalized after loading);
    ``raw_adjacency`` keeps the as-read values for exact serialization.
    ``features`` are the node feature rows, initialized to the working
    adjacency rows.
    """

    __slots__ = ("modality", "adjacency", "raw_adjacency", "weight_scale",
                 "features", "_neighbors")

    def __init__(self, modality: str, adjacency: np.ndarray,
                 raw_adjacency: np.ndarray | None = None,
                 weight_scale: float = 1.0):
        self.modality = modality
        self.adjacency = adjacency
        self.raw_adjacency = adjacency if raw_adjacency is None else raw_adjacency
        self.weight_scale = float(weight_scale)
        self.features = None
        self._neighbors = None

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted one-hop neighbor indices of node i (positive-weight edges)."""
        if self._neighbors is None:
            self._neighbors = [np.flatnonzero(row > 0.0) for row in self.adjacency]
        return self._neighbors[i]


def validate_graph(raw: np.ndarray, modality: str = STRUCTURAL) -> ConnectomeGraph:
    """Check a raw square matrix and wrap it as a graph.

    Rejects non-square, non-finite, negative and asymmetric (beyond 1e-9)
    input; diagonals below 1e-9 in magnitude are zeroed, larger ones are
    errors.
    """
    a = check_square(raw)
    check_finite(a)
    check_nonnegative(a)
    check_symmetric(a)
    a = zeroed_diagonal(a)
    return ConnectomeGraph(modality, a)


def normalize_graph(g: ConnectomeGraph) -> ConnectomeGraph:
    """Divide the working adjacency by its maximum entry (no-op on zero graphs)."""
    m = float(g.adjacency.max()) if g.adjacency.size else 0.0
    scale = m if m > 0.0 else 1.0
    out = ConnectomeGraph(g.modality, g.adjacency / scale,
                          raw_adjacency=g.raw_adjacency, weight_scale=scale)
    return out


def init_node_features(g: ConnectomeGraph) -> ConnectomeGraph:
    """Set each node's feature vector to its working adjacency row (idempotent)."""
    g.features = g.adjacency.copy()
    return g


class Subject:
    """A paired structural + morphological observation with a binary label."""

    __slots__ = ("id", "structural", "morphological", "label")

    def __init__(self, subject_id: str, structural: ConnectomeGraph,
                 morphological: ConnectomeGraph, label: int):
        if structural.n_nodes != morphological.n_nodes:
            raise DataFormatError(
                f"subject {subject_id!r}: modality sizes differ "
                f"({structural.n_nodes} vs {morphological.n_nodes})"
            )
        if label not in (0, 1):
            raise DataFormatError(f"subject {subject_id!r}: unknown label value {label!r}")
        self.id = subject_id
        self.structural = structural
        self.morphological = morphological
        self.label = int(label)

    @property
    def n_nodes(self) -> int:
        return self.structural.n_nodes


@dataclass
class DatasetSplit:
    """Disjoint, exhaustive train/val/test id lists for one seed."""

    seed: int
    train: list
    val: list
    test: list

    def to_json(self) -> dict:
        return {"seed": self.seed, "train": list(self.train),
                "val": list(self.val), "test": list(self.test)}

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetSplit":
        return cls(seed=int(obj["seed"]), train=list(obj["train"]),
                   val=list(obj["val"]), test=list(obj["test"]))


# ---------------------------------------------------------------------------
# matrix and manifest IO

def write_matrix_csv(path, matrix: np.ndarray) -> None:
    """Plain CSV of decimal floats; repr makes the round trip lossless."""
    lines = [",".join(repr(float(x)) for x in row) for row in matrix]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix_csv(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    rows = []
    for lineno, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError as exc:
            raise DataFormatError(f"{path}: bad number on line {lineno + 1}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DataFormatError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


def _load_graph(path, modality: str, atlas_size: int | None) -> ConnectomeGraph:
    raw = read_matrix_csv(path)
    g = validate_graph(raw, modality)
    if atlas_size is not None and g.n_nodes != atlas_size:
        raise DataFormatError(
            f"{path}: matrix is {g.n_nodes}x{g.n_nodes}, manifest atlas_size is {atlas_size}"
        )
    g = normalize_graph(g)
    return init_node_features(g)


def load_dataset(manifest_path) -> list[Subject]:
    """Load and validate every subject listed in a manifest JSON file."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{manifest_path}: invalid JSON: {exc}") from exc
    try:
        atlas_size = int(manifest["atlas_size"])
        entries = manifest["subjects"]
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{manifest_path}: missing manifest key: {exc}") from exc

    base = manifest_path.parent
    subjects = []
    for entry in entries:
        sid = str(entry["id"])
        sc = _load_graph(base / entry["sc"], STRUCTURAL, atlas_size)
        mc = _load_graph(base / entry["mc"], MORPHOLOGICAL, atlas_size)
        subjects.append(Subject(sid, sc, mc, entry["label"]))
    counts = class_counts(subjects)
    logger.info("loaded %d subjects (%d label-1, %d label-0) from %s",
                len(subjects), counts[1], counts[0], manifest_path)
    return subjects


def class_counts(subjects) -> dict:
    counts = {0: 0, 1: 0}
    for s in subjects:
        counts[s.label] += 1
    return counts


def save_dataset(subjects, out_dir, atlas_size: int | None = None) -> Path:
    """Write subjects (raw matrices) plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if atlas_size is None:
        atlas_size = subjects[0].n_nodes
    entries = []
    for s in subjects:
        sc_name = f"{s.id}_sc.csv"
        mc_name = f"{s.id}_mc.csv"
        write_matrix_csv(out_dir / sc_name, s.structural.raw_adjacency)
        write_matrix_csv(out_dir / mc_name, s.morphological.raw_adjacency)
        entries.append({"id": s.id, "sc": sc_name, "mc": mc_name, "label": s.label})
    manifest = {"atlas_size": int(atlas_size), "subjects": entries}
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path


# ---------------------------------------------------------------------------
# stratified splitting

def _largest_remainder(n: int, ratios) -> list[int]:
    """Integer allocation of n seats by ratio; ties go to the earlier slot."""
    exact = [n * r for r in ratios]
    base = [int(np.floor(e)) for e in exact]
    fracs = [e - b for e, b in zip(exact, base)]
    for _ in range(n - sum(base)):
        j = max(range(len(ratios)), key=lambda k: (fracs[k], -k))
        base[j] += 1
        fracs[j] = -1.0
    return base


def stratified_split(subjects, seed: int, ratios=SPLIT_RATIOS) -> DatasetSplit:
    """Deterministic class-stratified split with largest-remainder rounding.

    Global partition sizes are fixed by largest remainder on the total;
    per-class floor allocations are then topped up cell by cell in order
    of descending fractional part (ties: earlier partition, then lower
    class label) until the global sizes are met. Each class ends within
    one subject of exact stratification in every partition.
    """
    if len(subjects) < 10:
        raise ContractError(f"need at least 10 subjects to split, got {len(subjects)}")
    by_class = {0: [], 1: []}
    for s in subjects:
        by_class[s.label].append(s.id)
    for label, ids in by_class.items():
        if len(ids) == 0:
            raise ContractError(f"class {label} absent; cannot stratify")
        if len(ids) < 3:
            raise ContractError(
                f"class {label} has {len(ids)} member(s); cannot populate all partitions"
            )

    totals = _largest_remainder(len(subjects), ratios)

    alloc = {}
    fracs = {}
    for label in (0, 1):
        n_c = len(by_class[label])
        exact = [n_c * r for r in ratios]
        alloc[label] = [int(np.floor(e)) for e in exact]
        fracs[label] = [e - b for e, b in zip(exact, alloc[label])]
    remaining = {label: len(by_class[label]) - sum(alloc[label]) for label in (0, 1)}
    deficits = [totals[p] - alloc[0][p] - alloc[1][p] for p in range(3)]

    cells = sorted(
        ((label, p) for label in (0, 1) for p in range(3)),
        key=lambda c: (-fracs[c[0]][c[1]], c[1], c[0]),
    )
    for label, p in cells:
        if remaining[label] > 0 and deficits[p] > 0:
            alloc[label][p] += 1
            remaining[label] -= 1
            deficits[p] -= 1

    rng = np.random.default_rng(seed)
    parts = {name: [] for name in PARTITION_NAMES}
    for label in (0, 1):
        ids = sorted(by_class[label])
        order = rng.permutation(len(ids))
        shuffled = [ids[i] for i in order]
        start = 0
        for p, name in enumerate(PARTITION_NAMES):
            parts[name].extend(shuffled[start:start + alloc[label][p]])
            start += alloc[label][p]
    return DatasetSplit(seed=seed, train=parts["train"], val=parts["val"], test=parts["test"])
