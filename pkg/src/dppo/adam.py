"""Bias-corrected Adam on flat float64 vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericError
from .network import ParameterVector


@dataclass(frozen=True, eq=False)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, n: int, **kw) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, **kw)


def adam_step(params: ParameterVector, grads, state: AdamState, lr: float):
    """One Adam update. Returns ``(new_params, new_state)``; inputs are untouched."""
    g = np.asarray(grads, dtype=np.float64)
    n = len(params)
    if g.shape != (n,) or state.first_moment.shape != (n,) or state.second_moment.shape != (n,):
        raise InputError(
            f"length mismatch: params {n}, grads {g.shape}, moments {state.first_moment.shape}"
        )
    if lr < 0:
        raise InputError(f"learning rate must be >= 0, got {lr}")
    bad = np.flatnonzero(~np.isfinite(g))
    if bad.size:
        raise NumericError(f"non-finite gradient at parameter indices {bad[:8].tolist()}")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    theta = params.values - lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = AdamState(m, v, t, state.beta1, state.beta2, state.epsilon)
    return params.with_values(theta), new_state
