from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **hyper) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), **hyper)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """Bias-corrected Adam update, applied to ``params`` in place.

    Returns ``params`` for convenience; ``state`` is advanced by one step.
    """
    if params.shape != grads.shape or state.m.shape != params.shape or state.v.shape != params.shape:
        raise ConfigurationError(
            f"adam_step length mismatch: params {params.shape}, grads {grads.shape}, state {state.m.shape}"
        )
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1 ** state.t)
    v_hat = state.v / (1.0 - b2 ** state.t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps_adam)
    return params


class Adam:
    """Thin stateful wrapper around :func:`adam_step` for one flat vector."""

    def __init__(self, n_params: int, lr: float = 1e-2, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.state = AdamState.zeros(n_params, lr=lr, beta1=beta1, beta2=beta2, eps_adam=eps)

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        return adam_step(params, grads, self.state)
