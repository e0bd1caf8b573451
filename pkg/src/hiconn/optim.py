"""Adam optimizer over the tensor engine's leaf parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ContractError


@dataclass
class AdamState:
    """Moment estimates and step counter for one parameter list."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState) -> list[Tensor]:
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(grads):
        raise ContractError(f"{len(params)} parameters but {len(grads)} gradients")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.values) for p in params]
        state.second_moment = [np.zeros_like(p.values) for p in params]
    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g.shape != p.values.shape:
            raise ContractError(f"gradient shape {g.shape} does not match parameter {p.values.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p.values -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params


class Adam:
    """Convenience wrapper binding an AdamState to a fixed parameter list."""

    def __init__(self, params: list[Tensor], learning_rate: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = list(params)
        self.state = AdamState(learning_rate=learning_rate, beta1=beta1,
                               beta2=beta2, epsilon=epsilon)

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.values)
                 for p in self.params]
        adam_step(self.params, grads, self.state)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
