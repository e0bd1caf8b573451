"""Training loop, loss assembly, evaluation and the reproducible run record."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor, backward, cross_entropy_with_logits, scale
from .config import TrainConfig
from .connectome import DatasetSplit, Subject
from .errors import ContractError
from .metrics import Metrics, compute_metrics
from .model import Model, ForwardResult
from .optim import Adam


def total_loss(logits: Tensor, label: int, l_q: Tensor, config: TrainConfig):
    """eta1 * cross-entropy + eta2 * modularity loss; returns (task, total)."""
    task = cross_entropy_with_logits(logits, label)
    return task, scale(task, config.eta1) + scale(l_q, config.eta2)


@dataclass
class RunRecord:
    """Everything needed to audit and reproduce one training run.

    ``wall_clock_seconds`` is the only field excluded from the canonical
    serialization, so records from identical (dataset, config, seed) runs
    compare byte-identical via ``canonical_json``/``digest``.
    """

    config: dict
    variant: str
    split: dict
    epochs: list = field(default_factory=list)
    best_epoch: int = 0
    test_metrics: dict = field(default_factory=dict)
    partitions: list = field(default_factory=list)
    wall_clock_seconds: float = 0.0

    def canonical_json(self) -> str:
        payload = {
            "config": self.config,
            "variant": self.variant,
            "split": self.split,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "test_metrics": self.test_metrics,
            "partitions": self.partitions,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def to_json(self) -> dict:
        payload = json.loads(self.canonical_json())
        payload["wall_clock_seconds"] = self.wall_clock_seconds
        payload["digest"] = self.digest()
        return payload


def predict(model: Model, subjects) -> list:
    return [int(np.argmax(model.predict_logits(s))) for s in subjects]


def evaluate(model: Model, subjects) -> Metrics:
    """Argmax predictions scored against subject labels."""
    if not subjects:
        raise ContractError("evaluate needs at least one subject")
    preds = predict(model, subjects)
    return compute_metrics([s.label for s in subjects], preds)


def _epoch_eval(model: Model, subjects, config: TrainConfig):
    """Forward pass without a tape: mean losses plus prediction metrics."""
    tasks, mods, totals, preds = [], [], [], []
    for s in subjects:
        result = model.forward(s)
        task, total = total_loss(result.logits, s.label, result.modularity_loss, config)
        tasks.append(task.item())
        mods.append(result.modularity_loss.item())
        totals.append(total.item())
        preds.append(int(np.argmax(result.logits.values[0])))
    m = compute_metrics([s.label for s in subjects], preds)
    return float(np.mean(tasks)), float(np.mean(mods)), float(np.mean(totals)), m


def fit_model(model: Model, train_subjects, val_subjects, config: TrainConfig,
              on_step=None):
    """Seeded per-subject Adam training with best-validation-F1 checkpointing.

    Subjects are visited in a reshuffled order every epoch, one optimizer
    step each. The parameter snapshot with the highest validation F1 wins;
    ties keep the earlier epoch. Returns (history, best_epoch); the model
    is left holding the winning snapshot.
    """
    if not train_subjects:
        raise ContractError("empty training partition")
    if not val_subjects:
        raise ContractError("empty validation partition")
    params = model.parameters()
    opt = Adam(list(params.values()), learning_rate=config.learning_rate)
    order_rng = np.random.default_rng([config.seed, 0x5EED])

    history = []
    best_f1 = -1.0
    best_epoch = 0
    best_state = model.state_dict()
    for epoch in range(1, config.epochs + 1):
        order = order_rng.permutation(len(train_subjects))
        tasks, mods, totals = [], [], []
        for idx in order:
            subject = train_subjects[idx]
            with Tape() as tape:
                result = model.forward(subject)
                task, total = total_loss(result.logits, subject.label,
                                         result.modularity_loss, config)
                backward(total, tape)
            opt.step()
            opt.zero_grad()
            tasks.append(task.item())
            mods.append(result.modularity_loss.item())
            totals.append(total.item())
            if on_step is not None:
                on_step(tasks[-1], mods[-1], totals[-1])
        val_task, val_mod, val_total, val_metrics = _epoch_eval(model, val_subjects, config)
        history.append({
            "epoch": epoch,
            "train_task": float(np.mean(tasks)),
            "train_modularity": float(np.mean(mods)),
            "train_total": float(np.mean(totals)),
            "val_task": val_task,
            "val_modularity": val_mod,
            "val_total": val_total,
            "val_accuracy": val_metrics.accuracy,
            "val_f1": val_metrics.f1,
        })
        if val_metrics.f1 > best_f1:
            best_f1 = val_metrics.f1
            best_epoch = epoch
            best_state = model.state_dict()
    model.load_state(best_state)
    return history, best_epoch


def train(subjects, split: DatasetSplit, config: TrainConfig,
          variant: str = "full"):
    """Train on a dataset split and assemble the run record.

    Test metrics and partition dumps come from the best-validation
    checkpoint, never the final epoch.
    """
    by_id = {s.id: s for s in subjects}
    missing = [i for i in split.train + split.val + split.test if i not in by_id]
    if missing:
        raise ContractError(f"split references unknown subject ids: {missing[:5]}")
    train_subjects = [by_id[i] for i in split.train]
    val_subjects = [by_id[i] for i in split.val]
    test_subjects = [by_id[i] for i in split.test]

    start = time.perf_counter()
    model = Model(subjects[0].n_nodes, config, variant=variant)
    history, best_epoch = fit_model(model, train_subjects, val_subjects, config)
    test_metrics = evaluate(model, test_subjects)

    partitions = []
    for sid in sorted(split.test):
        result = model.forward(by_id[sid])
        partitions.append(result.partition.to_json(sid))

    record = RunRecord(
        config=config.to_dict(),
        variant=variant,
        split=split.to_json(),
        epochs=history,
        best_epoch=best_epoch,
        test_metrics=test_metrics.to_json(),
        partitions=partitions,
        wall_clock_seconds=time.perf_counter() - start,
    )
    return model, record
