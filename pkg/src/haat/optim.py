"""Adam optimizer over a :class:`~haat.params.ParamStore`."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .params import ParamStore


@dataclass
class AdamState:
    """Optimizer hyperparameters plus per-parameter moment buffers."""

    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamStore, lr: float = 2e-4, beta1: float = 0.9,
                   beta2: float = 0.99, eps: float = 1e-8) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps)
        for name, t in params.items():
            state.m[name] = np.zeros_like(t.data)
            state.v[name] = np.zeros_like(t.data)
        return state


def adam_step(params: ParamStore, state: AdamState) -> None:
    """Apply one bias-corrected Adam update in place and clear gradients.

    Every registered parameter must carry a gradient; a missing one means
    the forward pass silently dropped a weight, which is reported rather
    than skipped.
    """
    for name, t in params.items():
        if t.grad is None:
            raise ContractError(f"parameter '{name}' has no gradient; run backward first")
    state.step_count += 1
    step = state.step_count
    bc1 = 1.0 - state.beta1 ** step
    bc2 = 1.0 - state.beta2 ** step
    for name, t in params.items():
        g = t.grad
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        mhat = m / bc1
        vhat = v / bc2
        t.data -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(t.dtype, copy=False)
    params.zero_grads()
