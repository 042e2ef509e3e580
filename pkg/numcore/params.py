# numcore/params.py
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from numcore.errors import ShapeError, UsageError
from numcore.matrix import Matrix


@dataclass
class Parameter:
    """
    A learnable tensor.

    - grad always has the shape of value
    - frozen parameters receive zero gradient and are never touched by the optimizer
    - mask (optional, same shape) zeroes gradient entries; pruned weights use it
    """
    value: Matrix
    grad: Matrix = field(default=None)
    frozen: bool = False
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.grad.shape != self.value.shape:
            raise ShapeError("Parameter.grad", self.value.shape, self.grad.shape)
        if self.mask is not None and self.mask.shape != self.value.shape:
            raise ShapeError("Parameter.mask", self.value.shape, self.mask.shape)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad.fill(0.0)


class LossGraph:
    """
    Record of one forward pass.

    Subclasses fill `loss` during the forward and implement `_backprop`,
    which adds d(loss)/d(param) into every param.grad.
    """

    def __init__(self, params: Dict[str, Parameter]):
        self.params = params
        self.loss = 0.0
        self.recorded = False

    def mark_recorded(self):
        self.recorded = True

    def _backprop(self):
        raise NotImplementedError


def backward(graph: Optional[LossGraph], accumulate: bool = False) -> Dict[str, Parameter]:
    """
    Fill gradients for every parameter of the graph.

    A graph can be consumed once; calling again needs a new forward pass.
    """
    if graph is None or not graph.recorded:
        raise UsageError("backward() called without a recorded forward pass")

    if not accumulate:
        for p in graph.params.values():
            p.zero_grad()

    graph._backprop()
    graph.recorded = False

    for p in graph.params.values():
        if p.frozen:
            p.grad.fill(0.0)
        elif p.mask is not None:
            p.grad *= p.mask

    return graph.params
