# seq2seq/attention.py
from dataclasses import dataclass
from typing import Dict, NamedTuple

import numpy as np

from numcore.errors import ShapeError
from numcore.matrix import Rng, softmax, tanh
from numcore.params import Parameter


@dataclass
class AttentionScorer:
    """
    MLP scorer: score_i = w2 . tanh([s; h_i] W1 + b1)

    W1 rows [0, dec_dim) read the decoder state, the rest read the encoder state.
    """
    W1: Parameter
    b1: Parameter
    w2: Parameter

    @classmethod
    def init(cls, dec_dim: int, enc_dim: int, attn_dim: int, rng: Rng, scale: float = 0.08) -> "AttentionScorer":
        return cls(
            W1=Parameter(rng.uniform(-scale, scale, size=(dec_dim + enc_dim, attn_dim))),
            b1=Parameter(np.zeros(attn_dim)),
            w2=Parameter(rng.uniform(-scale, scale, size=(attn_dim, 1))),
        )

    @property
    def dec_dim(self) -> int:
        return self.W1.value.shape[0] - self.enc_dim

    @property
    def enc_dim(self) -> int:
        # decoder and encoder share the hidden size
        return self.W1.value.shape[0] // 2

    def parameters(self) -> Dict[str, Parameter]:
        return {"W1": self.W1, "b1": self.b1, "w2": self.w2}


class AttentionCache(NamedTuple):
    s: np.ndarray
    H: np.ndarray
    u: np.ndarray
    weights: np.ndarray
    context: np.ndarray


def encoder_projection(scorer: AttentionScorer, H: np.ndarray) -> np.ndarray:
    """Encoder half of the scorer's first layer, shared by every decoder step."""
    return H @ scorer.W1.value[scorer.dec_dim:]


def attend(scorer: AttentionScorer, s: np.ndarray, H: np.ndarray,
           H_proj: np.ndarray | None = None) -> AttentionCache:
    if H.ndim != 2 or H.shape[0] < 1 or H.shape[1] != scorer.enc_dim:
        raise ShapeError("attend encoder states", H.shape, ("N>=1", scorer.enc_dim))
    if s.shape != (scorer.dec_dim,):
        raise ShapeError("attend decoder state", s.shape, (scorer.dec_dim,))

    if H_proj is None:
        H_proj = encoder_projection(scorer, H)
    u = tanh(s @ scorer.W1.value[:scorer.dec_dim] + H_proj + scorer.b1.value)
    scores = (u @ scorer.w2.value)[:, 0]
    weights = softmax(scores)
    context = weights @ H
    return AttentionCache(s, H, u, weights, context)


def attend_backward(scorer: AttentionScorer, cache: AttentionCache,
                    dcontext: np.ndarray, dscores_extra: np.ndarray | None = None):
    """
    Accumulate scorer gradients.

    dscores_extra is a gradient taken directly w.r.t. the pre-softmax scores
    (the attention loss contributes there). Returns (ds, dH).
    """
    s, H, u, a = cache.s, cache.H, cache.u, cache.weights
    split = scorer.dec_dim

    dH = np.outer(a, dcontext)
    da = H @ dcontext
    dscores = a * (da - np.dot(a, da))
    if dscores_extra is not None:
        dscores = dscores + dscores_extra

    scorer.w2.grad += (u.T @ dscores)[:, None]
    dpre = np.outer(dscores, scorer.w2.value[:, 0]) * (1.0 - u * u)
    dpre_sum = dpre.sum(axis=0)

    scorer.b1.grad += dpre_sum
    scorer.W1.grad[:split] += np.outer(s, dpre_sum)
    scorer.W1.grad[split:] += H.T @ dpre

    ds = scorer.W1.value[:split] @ dpre_sum
    dH += dpre @ scorer.W1.value[split:].T
    return ds, dH
