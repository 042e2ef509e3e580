# numcore/optim.py
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from numcore.errors import ShapeError
from numcore.params import Parameter


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Dict[str, Parameter], state: AdamState) -> AdamState:
    """
    One bias-corrected Adam update using each parameter's current grad.

    Frozen parameters are skipped entirely: their value and moments stay put.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t

    for name, p in params.items():
        if p.frozen:
            continue

        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        if m.shape != p.value.shape:
            raise ShapeError(f"adam_step[{name}]", m.shape, p.value.shape)

        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)

        m_hat = m / correction1
        v_hat = v / correction2
        p.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)

    return state
