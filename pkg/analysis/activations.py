# analysis/activations.py
from dataclasses import dataclass

import numpy as np
import pandas as pd

from numcore.errors import ValidationError
from numcore.matrix import Rng
from analysis.traces import TraceSet

LEFT_SATURATION = 0.1
RIGHT_SATURATION = 0.9


# ============================================================
# Activation ranges
# ============================================================
def activation_distributions(traces: TraceSet, rng: Rng, array: str = "enc_h", k: int = 50) -> pd.DataFrame:
    """
    Distribution summary of k randomly sampled units over every step of every trace.

    Columns: unit, min, q1, median, q3, max, range, iqr.
    """
    acts = traces.rows(array)
    n_units = acts.shape[1]
    units = np.sort(rng.choice(n_units, size=min(k, n_units), replace=False))
    sampled = acts[:, units]
    q1, median, q3 = np.percentile(sampled, [25, 50, 75], axis=0)
    lo, hi = sampled.min(axis=0), sampled.max(axis=0)
    return pd.DataFrame({
        "unit": units,
        "min": lo,
        "q1": q1,
        "median": median,
        "q3": q3,
        "max": hi,
        "range": hi - lo,
        "iqr": q3 - q1,
    })


def narrow_units(summary: pd.DataFrame, width: float = 0.2) -> pd.DataFrame:
    """Sampled units whose full activation range is narrower than width."""
    return summary[summary["range"] < width]


# ============================================================
# Gate saturation
# ============================================================
@dataclass
class SaturationStats:
    """Per gate unit: share of observations below lo (closed) and above hi (open)."""
    array: str
    left: np.ndarray
    right: np.ndarray
    observations: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "unit": np.arange(len(self.left)),
            "left": self.left,
            "right": self.right,
        })

    def right_saturated_share(self, min_fraction: float = 0.5) -> float:
        """Share of units that are right-saturated in at least min_fraction of observations."""
        return float(np.mean(self.right >= min_fraction)) if len(self.right) else 0.0


def gate_saturation(traces: TraceSet, array: str = "dec_z",
                    lo: float = LEFT_SATURATION, hi: float = RIGHT_SATURATION) -> SaturationStats:
    """Pools all samples and all steps of the traces."""
    if array[-1] not in "zr":
        raise ValidationError(f"{array!r} is not a gate array")
    if not 0 <= lo <= hi <= 1:
        raise ValidationError(f"saturation bounds must satisfy 0 <= lo <= hi <= 1, got {lo}, {hi}")
    acts = traces.rows(array)
    return SaturationStats(
        array=array,
        left=np.mean(acts < lo, axis=0),
        right=np.mean(acts > hi, axis=0),
        observations=acts.shape[0],
    )
