"""
Adam with decoupled weight decay
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from camoflow.autograd.module import Parameter
from camoflow.exceptions import StateError
from camoflow.logging_config import get_logger

logger = get_logger('camoflow.autograd.optim')


@dataclass
class AdamState:
    """
    Optimizer hyperparameters plus per-parameter moments keyed by parameter name

    step increases by exactly one per update.
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def hyperparameters(self) -> Dict[str, float]:
        return {
            'lr': self.lr,
            'beta1': self.beta1,
            'beta2': self.beta2,
            'eps': self.eps,
            'weight_decay': self.weight_decay,
            'step': self.step,
        }


def _key(param: Parameter, index: int) -> str:
    return param.name or f"param_{index}"


def adam_step(params: Sequence[Parameter], state: AdamState) -> None:
    """
    One bias-corrected Adam update with decoupled weight decay

    p <- p - lr * mhat / (sqrt(vhat) + eps) - lr * weight_decay * p

    Gradients are left untouched; callers zero them.

    Raises:
        StateError: If a parameter has no gradient or mismatched moments
    """
    for index, param in enumerate(params):
        if param.grad is None:
            raise StateError(f"Parameter '{_key(param, index)}' has no gradient for adam_step")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step

    for index, param in enumerate(params):
        key = _key(param, index)
        grad = param.grad.astype(np.float64)
        m = state.m.get(key)
        v = state.v.get(key)
        if m is None or v is None:
            m = np.zeros(param.shape, dtype=np.float64)
            v = np.zeros(param.shape, dtype=np.float64)
        elif m.shape != param.shape or v.shape != param.shape:
            raise StateError(
                f"Moments for '{key}' have shape {m.shape}, parameter has {param.shape}"
            )

        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.m[key] = m
        state.v[key] = v

        m_hat = m / correction1
        v_hat = v / correction2
        current = param.data.astype(np.float64)
        updated = (
            current
            - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
            - state.lr * state.weight_decay * current
        )
        param.data = updated.astype(param.dtype)


class Adam:
    """
    Optimizer bound to a parameter list

    Example:
        >>> optimizer = Adam(model.parameters(), lr=1e-3, weight_decay=1e-4)
        >>> loss.backward()
        >>> optimizer.step()
        >>> optimizer.zero_grad()
    """

    def __init__(
        self,
        params: Sequence[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.params: List[Parameter] = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay)
        logger.debug(
            f"Adam initialized: {len(self.params)} tensors, lr={lr}, weight_decay={weight_decay}"
        )

    def step(self) -> None:
        adam_step(self.params, self.state)

    def zero_grad(self) -> None:
        for param in self.params:
            param.grad = None
