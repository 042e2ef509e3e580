# seq2seq/gru.py
"""
GRU cell in row-vector convention (x and h are 1-D, weights are [in x out]):

    z  = sigmoid(x W_iz + h W_hz + b_z)
    r  = sigmoid(x W_ir + h W_hr + b_r)
    hh = tanh(x W_ih + (r * h) W_hh + b_h)
    h' = (1 - z) * h + z * hh
"""
from dataclasses import dataclass
from typing import Dict, NamedTuple

import numpy as np

from numcore.errors import ShapeError
from numcore.matrix import Rng, sigmoid, tanh
from numcore.params import Parameter

INPUT_WEIGHTS = ("W_iz", "W_ir", "W_ih")
HIDDEN_WEIGHTS = ("W_hz", "W_hr", "W_hh")
BIASES = ("b_z", "b_r", "b_h")
SLOTS = INPUT_WEIGHTS + HIDDEN_WEIGHTS + BIASES


@dataclass
class GruCell:
    W_iz: Parameter
    W_ir: Parameter
    W_ih: Parameter
    W_hz: Parameter
    W_hr: Parameter
    W_hh: Parameter
    b_z: Parameter
    b_r: Parameter
    b_h: Parameter

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, rng: Rng, scale: float = 0.08) -> "GruCell":
        def weight(rows):
            return Parameter(rng.uniform(-scale, scale, size=(rows, hidden_dim)))

        return cls(
            W_iz=weight(input_dim), W_ir=weight(input_dim), W_ih=weight(input_dim),
            W_hz=weight(hidden_dim), W_hr=weight(hidden_dim), W_hh=weight(hidden_dim),
            b_z=Parameter(np.zeros(hidden_dim)),
            b_r=Parameter(np.zeros(hidden_dim)),
            b_h=Parameter(np.zeros(hidden_dim)),
        )

    @property
    def input_dim(self) -> int:
        return self.W_iz.value.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.W_hz.value.shape[0]

    def parameters(self) -> Dict[str, Parameter]:
        return {slot: getattr(self, slot) for slot in SLOTS}


class GruCache(NamedTuple):
    x: np.ndarray
    h_prev: np.ndarray
    z: np.ndarray
    r: np.ndarray
    hh: np.ndarray
    h: np.ndarray


def gru_step(cell: GruCell, x: np.ndarray, h_prev: np.ndarray) -> GruCache:
    if x.shape != (cell.input_dim,):
        raise ShapeError("gru_step input", x.shape, (cell.input_dim,))
    if h_prev.shape != (cell.hidden_dim,):
        raise ShapeError("gru_step hidden", h_prev.shape, (cell.hidden_dim,))

    z = sigmoid(x @ cell.W_iz.value + h_prev @ cell.W_hz.value + cell.b_z.value)
    r = sigmoid(x @ cell.W_ir.value + h_prev @ cell.W_hr.value + cell.b_r.value)
    hh = tanh(x @ cell.W_ih.value + (r * h_prev) @ cell.W_hh.value + cell.b_h.value)
    h = (1.0 - z) * h_prev + z * hh
    return GruCache(x, h_prev, z, r, hh, h)


def gru_backward(cell: GruCell, cache: GruCache, dh: np.ndarray):
    """
    Accumulate parameter gradients for one step.

    Returns (dx, dh_prev).
    """
    x, h_prev, z, r, hh = cache.x, cache.h_prev, cache.z, cache.r, cache.hh

    dz_pre = dh * (hh - h_prev) * z * (1.0 - z)
    dhh_pre = dh * z * (1.0 - hh * hh)
    dh_prev = dh * (1.0 - z)

    rh = r * h_prev
    d_rh = dhh_pre @ cell.W_hh.value.T
    dr_pre = d_rh * h_prev * r * (1.0 - r)
    dh_prev += d_rh * r

    cell.W_iz.grad += np.outer(x, dz_pre)
    cell.W_hz.grad += np.outer(h_prev, dz_pre)
    cell.b_z.grad += dz_pre
    cell.W_ir.grad += np.outer(x, dr_pre)
    cell.W_hr.grad += np.outer(h_prev, dr_pre)
    cell.b_r.grad += dr_pre
    cell.W_ih.grad += np.outer(x, dhh_pre)
    cell.W_hh.grad += np.outer(rh, dhh_pre)
    cell.b_h.grad += dhh_pre

    dx = dz_pre @ cell.W_iz.value.T + dr_pre @ cell.W_ir.value.T + dhh_pre @ cell.W_ih.value.T
    dh_prev += dz_pre @ cell.W_hz.value.T + dr_pre @ cell.W_hr.value.T
    return dx, dh_prev
