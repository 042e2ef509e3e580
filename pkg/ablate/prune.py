# ablate/prune.py
"""
Strong-neuron pruning by masking.

The top keep_frac hidden units by connectivity strength survive in each of
encoder and decoder; every weight and bias incident to any other unit is set
to zero and pinned there through Parameter.mask. Shapes never change.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from numcore.matrix import make_rng
from analysis.weights import HALVES, hidden_size, incidence, neuron_strength, top_units
from ablate.components import AblationError
from seq2seq.checkpoint import load_checkpoint, read_manifest, save_checkpoint
from seq2seq.config import TrainingConfig
from seq2seq.model import Seq2SeqModel
from seq2seq.train import TrainResult, evaluate, evaluate_splits, train
from taskgen.splits import DatasetBundle

logger = logging.getLogger(__name__)

DEFAULT_KEEP_FRAC = 0.05
RETRAIN_EPOCHS = 20


@dataclass
class PruneMask:
    keep_frac: float
    keep: Dict[str, np.ndarray]     # half -> bool per hidden unit

    def kept(self, half: str) -> np.ndarray:
        return np.flatnonzero(self.keep[half])

    def kept_counts(self) -> Dict[str, int]:
        return {half: int(self.keep[half].sum()) for half in self.keep}

    def to_dict(self) -> Dict:
        return {
            "keep_frac": self.keep_frac,
            "hidden": {half: int(len(k)) for half, k in self.keep.items()},
            "kept_units": {half: [int(u) for u in self.kept(half)] for half in self.keep},
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "PruneMask":
        keep = {}
        for half, units in d["kept_units"].items():
            k = np.zeros(d["hidden"][half], dtype=bool)
            k[np.asarray(units, dtype=int)] = True
            keep[half] = k
        return cls(d["keep_frac"], keep)


def build_mask(tensors: Dict[str, np.ndarray], keep_frac: float,
               strengths: Optional[Dict[str, np.ndarray]] = None) -> PruneMask:
    """Keep ceil(keep_frac * hidden) strongest units per half."""
    hidden = hidden_size(tensors)
    keep = {}
    for half in HALVES:
        s = strengths[half] if strengths is not None else neuron_strength(tensors, half)
        k = np.zeros(hidden, dtype=bool)
        k[top_units(s, keep_frac)] = True
        keep[half] = k
    return PruneMask(keep_frac, keep)


def weight_masks(mask: PruneMask, shapes: Dict[str, tuple]) -> Dict[str, np.ndarray]:
    """Float 0/1 mask per touched tensor; 0 on every slice owned by a removed unit."""
    masks: Dict[str, np.ndarray] = {}
    for half in HALVES:
        removed = np.flatnonzero(~mask.keep[half])
        hidden = len(mask.keep[half])
        for name, axis, offset in incidence(half, hidden, with_biases=True):
            m = masks.setdefault(name, np.ones(shapes[name]))
            idx = offset + removed
            if axis == 0:
                m[idx] = 0.0
            else:
                m[:, idx] = 0.0
    return masks


def apply_mask(model: Seq2SeqModel, mask: PruneMask) -> Seq2SeqModel:
    params = model.named_parameters()
    for name, m in weight_masks(mask, {n: p.value.shape for n, p in params.items()}).items():
        params[name].value[m == 0.0] = 0.0
        params[name].mask = m
    return model


def mask_respected(model: Seq2SeqModel, mask: PruneMask) -> bool:
    """True when every pruned entry is exactly zero."""
    params = model.named_parameters()
    masks = weight_masks(mask, {n: p.value.shape for n, p in params.items()})
    return all(not np.any(params[n].value[m == 0.0]) for n, m in masks.items())


def _check_keep_frac(keep_frac: float, force: bool) -> None:
    if not 0 <= keep_frac <= 1:
        raise AblationError(f"keep_frac must be in [0, 1], got {keep_frac}")
    if keep_frac == 0 and not force:
        raise AblationError("keep_frac=0 removes every unit; pass force to run it anyway")


def prune_model(model: Seq2SeqModel, keep_frac: float = DEFAULT_KEEP_FRAC,
                strengths: Optional[Dict[str, np.ndarray]] = None, force: bool = False):
    """Masked copy of the model and its mask. The original is left untouched."""
    _check_keep_frac(keep_frac, force)
    pruned = model.copy()
    tensors = {n: p.value for n, p in pruned.named_parameters().items()}
    mask = build_mask(tensors, keep_frac, strengths)
    apply_mask(pruned, mask)
    logger.info("pruned to %s units (keep_frac=%g)", mask.kept_counts(), keep_frac)
    return pruned, mask


# ============================================================
# Prune -> evaluate -> retrain
# ============================================================
@dataclass
class PruneResult:
    mode: str
    keep_frac: float
    kept_units: Dict[str, int]
    before: Dict[str, float] = field(default_factory=dict)
    after_prune: Dict[str, float] = field(default_factory=dict)
    after_retrain: Dict[str, float] = field(default_factory=dict)
    retrain_epochs: int = 0
    mask_preserved: Optional[bool] = None
    status: str = "ok"
    reason: Optional[str] = None

    def to_dict(self) -> Dict:
        return asdict(self)


def prune_and_evaluate(model: Seq2SeqModel, bundle: DatasetBundle, keep_frac: float = DEFAULT_KEEP_FRAC,
                       force: bool = False):
    result = PruneResult(mode=model.mode, keep_frac=keep_frac, kept_units={})
    result.before = evaluate_splits(model, bundle)
    pruned, mask = prune_model(model, keep_frac, force=force)
    result.kept_units = mask.kept_counts()
    result.after_prune = evaluate_splits(pruned, bundle)
    logger.info("%s model NC %.3f -> %.3f after pruning", model.mode,
                result.before["NC"], result.after_prune["NC"])
    return pruned, mask, result


def retrain_pruned(model: Seq2SeqModel, mask: PruneMask, bundle: DatasetBundle,
                   training: Optional[TrainingConfig] = None, epochs: int = RETRAIN_EPOCHS):
    """
    Retrain a masked model with the main training parameters for `epochs` epochs.

    Returns (TrainResult, new-composition accuracy, mask_preserved).
    """
    cfg = replace(training or TrainingConfig(), epochs=epochs)
    apply_mask(model, mask)
    trained: TrainResult = train(model, bundle, cfg, make_rng(cfg.seed, "prune"))
    preserved = mask_respected(model, mask)
    if not preserved:
        logger.error("pruned weights moved away from zero during retraining")
    nc = evaluate(model, bundle.new_compositions)
    logger.info("%s model NC %.3f after %d retraining epochs", model.mode, nc, epochs)
    return trained, nc, preserved


def save_pruned(model: Seq2SeqModel, mask: PruneMask, path: Path,
                training: Optional[Dict] = None, extra: Optional[Dict] = None) -> Path:
    return save_checkpoint(model, path, training=training, extra={**(extra or {}), "prune": mask.to_dict()})


def load_pruned(path: Path):
    """Model with its mask re-attached, so further training keeps pruned weights at zero."""
    manifest = read_manifest(path)
    info = (manifest.get("extra") or {}).get("prune")
    if info is None:
        raise AblationError(f"{path}: checkpoint carries no prune mask")
    mask = PruneMask.from_dict(info)
    model = apply_mask(load_checkpoint(path), mask)
    return model, mask
