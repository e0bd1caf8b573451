"""Run configuration: every hyperparameter and seed governing a training run."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import ContractError


@dataclass
class TrainConfig:
    seed: int = 0
    learning_rate: float = 1e-4
    eta1: float = 0.5               # task-loss weight
    eta2: float = 0.2               # modularity-loss weight
    epochs: int = 200
    embed_dim: int = 32
    modules: int = 8
    threshold: float | None = None  # module membership cut; defaults to 1.5/modules
    neighbor_budget: int = 5
    classifier_hidden: int = 64

    def __post_init__(self):
        if self.threshold is None:
            self.threshold = 1.5 / self.modules
        self.validate()

    def validate(self) -> None:
        positive = {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "embed_dim": self.embed_dim,
            "modules": self.modules,
            "threshold": self.threshold,
            "neighbor_budget": self.neighbor_budget,
            "classifier_hidden": self.classifier_hidden,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ContractError(f"config field {name} must be positive, got {value}")
        for name, value in (("eta1", self.eta1), ("eta2", self.eta2)):
            if not 0.0 < value <= 1.0:
                raise ContractError(f"config field {name} must lie in (0, 1], got {value}")
        if self.modules < 2:
            raise ContractError(f"need at least 2 modules, got {self.modules}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ContractError(f"unknown config fields: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
