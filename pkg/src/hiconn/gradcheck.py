"""Finite-difference verification of the full model's analytic gradients.

The oracle only ever evaluates the forward loss at perturbed parameter
values, so it stays independent of the backward rules it checks. Used by
the ``gradcheck`` CLI subcommand and by the test suite.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tape, backward
from .config import TrainConfig
from .connectome import Subject
from .model import Model, VARIANT_FULL
from .synthetic import SyntheticSpec, sample_subject
from .training import total_loss

DEFAULT_STEP = 1e-5
REL_TOLERANCE = 1e-4


def central_difference(f, arrays, h: float = DEFAULT_STEP) -> list:
    """Central finite differences of scalar f() w.r.t. arrays mutated in place."""
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr)
        flat, gf = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = f()
            flat[i] = old - h
            fm = f()
            flat[i] = old
            gf[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray,
                   floor: float = 1e-6) -> np.ndarray:
    """Entrywise |a - n| / max(|a|, |n|, floor); the floor absorbs dead entries."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def toy_config(seed: int = 1) -> TrainConfig:
    """Small everything so the exhaustive sweep stays well under a minute."""
    return TrainConfig(seed=seed, learning_rate=1e-4, epochs=1, embed_dim=8,
                       modules=3, neighbor_budget=2, classifier_hidden=8)


def toy_subject(seed: int = 1, n_nodes: int = 6) -> Subject:
    spec = SyntheticSpec(n_subjects=1, n_nodes=n_nodes, n_modules=2,
                         p_in=0.9, p_out=0.3, delta=0.5, prevalence=0.5)
    return sample_subject(spec, "toy", 1, np.random.default_rng(seed))


def model_loss_gradients(model: Model, subject: Subject):
    """One taped forward/backward; returns {name: analytic gradient}."""
    params = model.parameters()
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        result = model.forward(subject)
        _, total = total_loss(result.logits, subject.label,
                              result.modularity_loss, model.config)
        backward(total, tape)
    return {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.values))
        for name, p in params.items()
    }


def gradient_report(seed: int = 1, config: TrainConfig | None = None,
                    subject: Subject | None = None, variant: str = VARIANT_FULL,
                    h: float = DEFAULT_STEP) -> dict:
    """Compare every parameter gradient of the total loss to central differences.

    Returns {"max_error": float, "per_parameter": {name: max rel error}}.
    """
    config = config or toy_config(seed)
    subject = subject or toy_subject(seed)
    model = Model(subject.n_nodes, config, variant=variant)
    params = model.parameters()

    analytic = model_loss_gradients(model, subject)

    def loss_value() -> float:
        result = model.forward(subject)
        _, total = total_loss(result.logits, subject.label,
                              result.modularity_loss, config)
        return total.item()

    per_parameter = {}
    for name, p in params.items():
        numeric = central_difference(loss_value, [p.values], h=h)[0]
        err = relative_error(analytic[name], numeric)
        per_parameter[name] = float(err.max()) if err.size else 0.0
    return {
        "max_error": max(per_parameter.values()),
        "per_parameter": per_parameter,
    }
