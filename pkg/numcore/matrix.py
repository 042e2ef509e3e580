# numcore/matrix.py
import zlib
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from numcore.errors import NonFiniteError, ShapeError

Matrix = NDArray[np.float64]
Rng = np.random.Generator

PROB_FLOOR = 1e-12


# ============================================================
# Random number generation
# ============================================================
def make_rng(seed: int, name: str = "") -> Rng:
    """
    Named, seeded generator.

    The name is folded into the seed sequence with crc32 (stable across
    platforms and interpreter runs, unlike hash()), so "train" and "splits"
    streams drawn from the same seed never overlap.
    """
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key])))


# ============================================================
# Matrix helpers
# ============================================================
def as_matrix(values, rows: int | None = None, cols: int | None = None) -> Matrix:
    m = np.array(values, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError("as_matrix", m.shape, (rows, cols))
    if (rows is not None and m.shape[0] != rows) or (cols is not None and m.shape[1] != cols):
        raise ShapeError("as_matrix", m.shape, (rows, cols))
    return m


def check_finite(name: str, m: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    return a @ b


# ============================================================
# Nonlinearities
# ============================================================
def sigmoid(x: np.ndarray) -> np.ndarray:
    # split on sign so exp never overflows
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def softmax(v: np.ndarray) -> np.ndarray:
    """Softmax over the last axis with max-subtraction."""
    v = np.asarray(v, dtype=np.float64)
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


# ============================================================
# Losses
# ============================================================
@dataclass
class Diagnostics:
    floor_hits: int = 0


def cross_entropy(
    predicted: np.ndarray,
    target_index: int,
    diagnostics: Diagnostics | None = None,
) -> float:
    p = float(predicted[target_index])
    if p < PROB_FLOOR:
        p = PROB_FLOOR
        if diagnostics is not None:
            diagnostics.floor_hits += 1
    return -float(np.log(p))


def soft_cross_entropy(
    predicted: np.ndarray,
    target: np.ndarray,
    diagnostics: Diagnostics | None = None,
) -> float:
    """-sum(target * log(predicted)) with the same probability floor."""
    clipped = np.maximum(predicted, PROB_FLOOR)
    if diagnostics is not None:
        diagnostics.floor_hits += int(np.sum((predicted < PROB_FLOOR) & (target > 0)))
    return float(-np.sum(target * np.log(clipped)))
