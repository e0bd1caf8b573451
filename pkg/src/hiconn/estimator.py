"""Scikit-learn style front end for the paired-graph classifier.

X is a list of :class:`~hiconn.connectome.Subject`; labels live on the
subjects, so ``y`` is optional and only cross-checked when given. The
estimator composes with sklearn tooling through ``get_params`` /
``set_params`` while training runs on the package's own engine.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .config import TrainConfig
from .errors import ContractError
from .model import Model, VARIANT_FULL
from .training import evaluate, fit_model


def _check_subjects(X):
    if len(X) == 0:
        raise ContractError("need at least one subject")
    n = X[0].n_nodes
    for s in X:
        if s.n_nodes != n:
            raise ContractError(
                f"all subjects must share one atlas; got {n} and {s.n_nodes} nodes"
            )
    return n


def _check_labels(X, y):
    if y is None:
        return
    y = np.asarray(y)
    if len(y) != len(X):
        raise ContractError(f"{len(y)} labels for {len(X)} subjects")
    mismatched = [s.id for s, yi in zip(X, y) if s.label != int(yi)]
    if mismatched:
        raise ContractError(f"labels disagree with subject labels: {mismatched[:5]}")


class ConnectomeClassifier(BaseEstimator, ClassifierMixin):
    """Binary classifier over paired structural/morphological graphs.

    Parameters mirror the run configuration; ``variant`` selects one of
    the ablation variants ("full" trains the complete model).
    """

    def __init__(self, embed_dim=32, modules=8, threshold=None, neighbor_budget=5,
                 classifier_hidden=64, learning_rate=1e-4, eta1=0.5, eta2=0.2,
                 epochs=200, seed=0, variant=VARIANT_FULL):
        self.embed_dim = embed_dim
        self.modules = modules
        self.threshold = threshold
        self.neighbor_budget = neighbor_budget
        self.classifier_hidden = classifier_hidden
        self.learning_rate = learning_rate
        self.eta1 = eta1
        self.eta2 = eta2
        self.epochs = epochs
        self.seed = seed
        self.variant = variant

    def _config(self) -> TrainConfig:
        return TrainConfig(
            seed=self.seed, learning_rate=self.learning_rate, eta1=self.eta1,
            eta2=self.eta2, epochs=self.epochs, embed_dim=self.embed_dim,
            modules=self.modules, threshold=self.threshold,
            neighbor_budget=self.neighbor_budget,
            classifier_hidden=self.classifier_hidden,
        )

    def fit(self, X, y=None, validation_data=None):
        """Train on subjects X; checkpoint selection uses ``validation_data``
        when given, otherwise the training subjects themselves."""
        n_nodes = _check_subjects(X)
        _check_labels(X, y)
        config = self._config()
        val = list(validation_data) if validation_data else list(X)
        self.model_ = Model(n_nodes, config, variant=self.variant)
        self.history_, self.best_epoch_ = fit_model(self.model_, list(X), val, config)
        self.classes_ = np.array([0, 1])
        self.n_regions_ = n_nodes
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise ContractError("estimator is not fitted; call fit first")

    def decision_logits(self, X) -> np.ndarray:
        self._require_fitted()
        return np.array([self.model_.predict_logits(s) for s in X])

    def predict_proba(self, X) -> np.ndarray:
        logits = self.decision_logits(X)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.decision_logits(X).argmax(axis=1)

    def score(self, X, y=None) -> float:
        """Plain accuracy fraction, sklearn-style."""
        self._require_fitted()
        if y is None:
            y = [s.label for s in X]
        preds = self.predict(X)
        return float(np.mean([int(p) == int(t) for p, t in zip(preds, y)]))

    def evaluate(self, X):
        """Package metrics (percent accuracy / positive-class F1)."""
        self._require_fitted()
        return evaluate(self.model_, list(X))
