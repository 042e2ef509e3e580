# seq2seq/losses.py
from typing import Sequence

import numpy as np

from numcore.matrix import Diagnostics, cross_entropy, soft_cross_entropy


def attention_targets(positions: Sequence[int], n_inputs: int) -> np.ndarray:
    """One-hot T x N target matrix from per-step input positions."""
    targets = np.zeros((len(positions), n_inputs))
    targets[np.arange(len(positions)), list(positions)] = 1.0
    return targets


def ag_loss(predicted: np.ndarray, targets: np.ndarray, diagnostics: Diagnostics | None = None) -> float:
    """
    Attention guidance loss: (1/T) sum_t sum_i -target[t, i] * log predicted[t, i].

    Both arguments are T x N row-stochastic.
    """
    T = predicted.shape[0]
    if T == 0:
        return 0.0
    return sum(soft_cross_entropy(predicted[t], targets[t], diagnostics) for t in range(T)) / T


def token_nll(step_probs: Sequence[np.ndarray], target_ids: Sequence[int],
              diagnostics: Diagnostics | None = None) -> float:
    """Negative log-likelihood of the target tokens averaged over decoder steps."""
    if not target_ids:
        return 0.0
    return sum(cross_entropy(p, y, diagnostics) for p, y in zip(step_probs, target_ids)) / len(target_ids)
