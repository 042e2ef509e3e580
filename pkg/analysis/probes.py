# analysis/probes.py
"""
Diagnostic classifiers on hidden activations.

A probe is an unregularised multinomial logistic regression. Its units are
ranked by summed |weight| over classes, and the functional group is the
shortest prefix of that ranking whose probe reaches `ratio` of the
all-unit accuracy.
"""
import logging
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import joblib
import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split

from numcore.errors import ValidationError
from numcore.matrix import Rng
from analysis.traces import TraceSet
from analysis.weights import top_units

logger = logging.getLogger(__name__)

GATE_ARRAYS = {"update": "dec_z", "reset": "dec_r"}


class ProbeError(ValidationError):
    pass


@dataclass(frozen=True)
class ProbeConfig:
    max_iter: int = 5000
    tol: float = 1e-7
    test_size: float = 0.25
    seed: int = 0
    ratio: float = 0.95
    selection: str = "retrain"      # or "mask": zero the full probe's other units

    def __post_init__(self):
        if self.selection not in ("retrain", "mask"):
            raise ProbeError(f"unknown selection {self.selection!r}")
        if not 0 < self.ratio <= 1:
            raise ProbeError("ratio must be in (0, 1]")


# ============================================================
# Probes
# ============================================================
@dataclass
class LinearProbe:
    weight: np.ndarray          # n_units x n_classes
    bias: np.ndarray            # n_classes
    classes: np.ndarray
    units: np.ndarray           # input columns the probe reads
    n_iter: int = 0

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X[:, self.units] @ self.weight + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.classes[np.argmax(self.decision(X), axis=1)]

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(X) == y)) if len(y) else 0.0

    def unit_ranking(self) -> np.ndarray:
        """Units ordered by summed |weight| across classes, largest first."""
        order = np.argsort(-np.abs(self.weight).sum(axis=1), kind="stable")
        return self.units[order]

    def masked(self, keep: Sequence[int]) -> "LinearProbe":
        mask = np.isin(self.units, np.asarray(keep))
        return LinearProbe(self.weight * mask[:, None], self.bias, self.classes, self.units, self.n_iter)


@dataclass
class ProbeSplit:
    X_train: np.ndarray
    X_test: np.ndarray
    y_train: np.ndarray
    y_test: np.ndarray


def split_rows(X: np.ndarray, y: np.ndarray, config: ProbeConfig) -> ProbeSplit:
    """Seeded hold-out; stratified whenever every class has two or more rows."""
    _, counts = np.unique(y, return_counts=True)
    stratify = y if counts.min() >= 2 else None
    X_train, X_test, y_train, y_test = train_test_split(
        X, y, test_size=config.test_size, random_state=config.seed, stratify=stratify,
    )
    return ProbeSplit(X_train, X_test, y_train, y_test)


def train_probe(X: np.ndarray, y: np.ndarray, config: ProbeConfig,
                units: Optional[Sequence[int]] = None) -> LinearProbe:
    classes = np.unique(y)
    if len(classes) < 2:
        raise ProbeError(f"probe needs at least two label classes, got {classes.tolist()}")
    units = np.arange(X.shape[1]) if units is None else np.asarray(units, dtype=int)

    # no regularisation; fitting stops on tol or max_iter
    clf = LogisticRegression(penalty=None, solver="lbfgs", tol=config.tol, max_iter=config.max_iter)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        clf.fit(X[:, units], y)
    if any(issubclass(w.category, ConvergenceWarning) for w in caught):
        logger.debug("probe on %d units stopped at max_iter=%d", len(units), config.max_iter)

    coef, intercept = clf.coef_.T, clf.intercept_
    if len(clf.classes_) == 2:
        # sklearn keeps one column for binary problems; expand to one per class
        coef = np.hstack([np.zeros_like(coef), coef])
        intercept = np.array([0.0, intercept[0]])
    return LinearProbe(coef, intercept, clf.classes_, units, int(np.max(clf.n_iter_)))


# ============================================================
# Functional groups
# ============================================================
@dataclass
class ProbeReport:
    name: str
    full_accuracy: float
    group: List[int]
    group_accuracy: float
    majority_baseline: float
    n_rows: int
    prefix_accuracies: List[float] = field(default_factory=list)
    non_monotonic_steps: int = 0
    overlap: Optional[float] = None

    @property
    def group_size(self) -> int:
        return len(self.group)

    def to_dict(self) -> Dict:
        d = asdict(self)
        d["group_size"] = self.group_size
        return d


def majority_share(y: np.ndarray) -> float:
    if not len(y):
        return 0.0
    _, counts = np.unique(y, return_counts=True)
    return float(counts.max() / len(y))


def functional_group(probe: LinearProbe, split: ProbeSplit, config: ProbeConfig,
                     name: str = "probe") -> ProbeReport:
    full = probe.accuracy(split.X_test, split.y_test)
    target = config.ratio * full
    ranking = probe.unit_ranking()

    accs: List[float] = []
    group: List[int] = []
    for k in range(1, len(ranking) + 1):
        prefix = ranking[:k]
        if config.selection == "retrain":
            acc = train_probe(split.X_train, split.y_train, config, units=prefix).accuracy(split.X_test, split.y_test)
        else:
            acc = probe.masked(prefix).accuracy(split.X_test, split.y_test)
        accs.append(acc)
        if acc >= target:
            group = [int(u) for u in prefix]
            break

    drops = sum(1 for a, b in zip(accs, accs[1:]) if b < a)
    if len(accs) > 1 and drops > 0.1 * (len(accs) - 1):
        logger.warning("%s: accuracy dropped on %d of %d prefix steps", name, drops, len(accs) - 1)

    return ProbeReport(
        name=name,
        full_accuracy=full,
        group=group,
        group_accuracy=accs[-1] if accs else 0.0,
        majority_baseline=majority_share(split.y_test),
        n_rows=len(split.y_train) + len(split.y_test),
        prefix_accuracies=accs,
        non_monotonic_steps=drops,
    )


def top_weight_overlap(group: Sequence[int], strengths: np.ndarray, frac: float = 0.05) -> float:
    """Share of the group found among the top-frac strongest units."""
    if not len(group):
        return 0.0
    top = set(int(u) for u in top_units(strengths, frac))
    return sum(1 for u in group if int(u) in top) / len(group)


def run_probe(X: np.ndarray, y: np.ndarray, config: ProbeConfig, name: str,
              strengths: Optional[np.ndarray] = None):
    """Split, fit on all units, find the functional group. Returns (report, probe)."""
    split = split_rows(X, y, config)
    probe = train_probe(split.X_train, split.y_train, config)
    report = functional_group(probe, split, config, name=name)
    if strengths is not None:
        report.overlap = top_weight_overlap(report.group, strengths)
    logger.info("%s: accuracy %.3f (all units %.3f), group of %d units",
                name, report.group_accuracy, report.full_accuracy, report.group_size)
    return report, probe


# ============================================================
# The probing experiments
# ============================================================
def table_probe(traces: TraceSet, config: ProbeConfig, array: str = "enc_h",
                strengths: Optional[np.ndarray] = None):
    """Predict the table processed at each step from activations."""
    X, y = traces.table_rows(array)
    return run_probe(X, y, config, f"table[{array}]", strengths)


def timestep_probe(traces: TraceSet, config: ProbeConfig, strengths: Optional[np.ndarray] = None):
    """Predict the encoder step index (0, 1, 2) from encoder hidden states."""
    X, y = traces.timestep_rows("enc_h")
    return run_probe(X, y, config, "timestep[enc_h]", strengths)


def gate_probe(traces: TraceSet, config: ProbeConfig, gate: str = "update",
               strengths: Optional[np.ndarray] = None):
    """Predict the current table from decoder update or reset gate activations."""
    if gate not in GATE_ARRAYS:
        raise ProbeError(f"unknown gate {gate!r}; expected one of {sorted(GATE_ARRAYS)}")
    return table_probe(traces, config, GATE_ARRAYS[gate], strengths)


def shuffled_table_probe(traces: TraceSet, config: ProbeConfig, rng: Rng, array: str = "enc_h"):
    """Control: table labels permuted; accuracy should sit near the majority share."""
    X, y = traces.table_rows(array)
    report, probe = run_probe(X, rng.permutation(y), config, f"table-shuffled[{array}]")
    return report, probe


def save_probe(probe: LinearProbe, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    joblib.dump(probe, path)
    return path


def load_probe(path: Path) -> LinearProbe:
    return joblib.load(path)
