# numcore/gradcheck.py
import logging
from typing import Callable, Dict, List, Tuple

import numpy as np

from numcore.matrix import Rng
from numcore.params import LossGraph, Parameter, backward

logger = logging.getLogger(__name__)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def grad_check(
    params: Dict[str, Parameter],
    forward: Callable[[], LossGraph],
    rng: Rng,
    eps: float = 1e-5,
    samples: int = 200,
) -> Tuple[float, List[Dict]]:
    """
    Compare analytic gradients with central differences.

    `forward` must run a full deterministic forward pass over the batch and
    return its LossGraph. Entries are sampled uniformly over all unfrozen
    parameter entries; when there are fewer than `samples` entries, all of
    them are checked.

    Returns (max relative error, per-entry records).
    """
    live = [(name, p) for name, p in params.items() if not p.frozen and p.value.size]
    if not live:
        return 0.0, []

    backward(forward())
    analytic = {name: p.grad.copy() for name, p in live}

    sizes = np.array([p.value.size for _, p in live])
    total = int(sizes.sum())
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    if total <= samples:
        flat = np.arange(total)
    else:
        flat = np.sort(rng.choice(total, size=samples, replace=False))

    records = []
    worst = 0.0
    for k in flat:
        which = int(np.searchsorted(offsets, k, side="right") - 1)
        name, p = live[which]
        idx = np.unravel_index(int(k - offsets[which]), p.value.shape)

        original = p.value[idx]
        p.value[idx] = original + eps
        plus = forward().loss
        p.value[idx] = original - eps
        minus = forward().loss
        p.value[idx] = original

        numeric = (plus - minus) / (2.0 * eps)
        exact = float(analytic[name][idx])
        err = relative_error(exact, numeric)
        worst = max(worst, err)
        records.append({
            "param": name,
            "index": [int(i) for i in idx],
            "analytic": exact,
            "numeric": float(numeric),
            "rel_error": err,
        })

    logger.debug("grad_check: %d entries, max relative error %.3e", len(records), worst)
    return worst, records
