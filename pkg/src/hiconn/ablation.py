"""Multi-seed ablation harness comparing the degraded variants to the full model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TrainConfig
from .connectome import stratified_split
from .model import (
    VARIANT_FIXED_PARTITION,
    VARIANT_FULL,
    VARIANT_NO_ATTENTION,
    VARIANT_NO_THRESHOLD,
)
from .training import train

TABLE_HEADER = "variant\tACC\tF1\tACC_sd\tF1_sd"
ABLATION_ORDER = (VARIANT_NO_ATTENTION, VARIANT_FIXED_PARTITION,
                  VARIANT_NO_THRESHOLD, VARIANT_FULL)


@dataclass
class VariantResult:
    variant: str
    accuracies: list
    f1_scores: list

    @property
    def acc_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def f1_mean(self) -> float:
        return float(np.mean(self.f1_scores))

    def format_row(self) -> str:
        return (f"{self.variant}\t{self.acc_mean:.2f}\t{self.f1_mean:.2f}\t"
                f"{np.std(self.accuracies):.2f}\t{np.std(self.f1_scores):.2f}")


def ablate(subjects, config: TrainConfig, seeds, variants=ABLATION_ORDER,
           log=None) -> list:
    """Train every variant on a shared seed set; per-seed splits are shared too."""
    seeds = list(seeds)
    splits = {seed: stratified_split(subjects, seed) for seed in seeds}
    results = []
    for variant in variants:
        accs, f1s = [], []
        for seed in seeds:
            run_config = TrainConfig(**{**config.to_dict(), "seed": seed})
            _, record = train(subjects, splits[seed], run_config, variant=variant)
            accs.append(record.test_metrics["accuracy"])
            f1s.append(record.test_metrics["f1"])
            if log is not None:
                log(f"{variant} seed={seed}: ACC={accs[-1]:.2f} F1={f1s[-1]:.2f}")
        results.append(VariantResult(variant, accs, f1s))
    return results


def format_table(results) -> str:
    return "\n".join([TABLE_HEADER] + [r.format_row() for r in results]) + "\n"
