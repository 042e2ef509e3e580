# ablate/components.py
"""
Cross-model component substitution.

A component is a named set of checkpoint tensors. It is lifted out of a
donor model, implanted (frozen) into a host of the other mode, and the host
is retrained at a low learning rate with its own loss.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed

from numcore.errors import NumericalError, ValidationError
from numcore.matrix import make_rng
from seq2seq.checkpoint import load_checkpoint, read_tensors
from seq2seq.config import TrainingConfig
from seq2seq.gru import HIDDEN_WEIGHTS, INPUT_WEIGHTS
from seq2seq.model import Seq2SeqModel, tensor_names
from seq2seq.train import evaluate_splits, train
from taskgen.splits import DatasetBundle

logger = logging.getLogger(__name__)

SWAP_LR = 0.001


class AblationError(ValidationError):
    pass


class ComponentKind(str, Enum):
    ENCODER = "Encoder"
    DECODER = "Decoder"
    ENCODER_EMBEDDING = "EncoderEmbedding"
    DECODER_EMBEDDING = "DecoderEmbedding"
    ENCODER_WIH = "EncoderWih"
    ENCODER_WHH = "EncoderWhh"
    DECODER_WIH = "DecoderWih"
    DECODER_WHH = "DecoderWhh"

    @classmethod
    def parse(cls, value: str) -> "ComponentKind":
        for kind in cls:
            if value.lower() in (kind.value.lower(), kind.name.lower()):
                return kind
        raise AblationError(f"unknown component {value!r}; expected one of {[k.value for k in cls]}")

    @property
    def half(self) -> str:
        return "encoder" if self.value.startswith("Encoder") else "decoder"


def component_tensors(kind: ComponentKind) -> List[str]:
    """
    Checkpoint tensor names making up a component.

    - Encoder / Decoder: every tensor of that half (Decoder includes the
      attention scorer and the output projection)
    - *Embedding: the embedding matrix
    - *Wih / *Whh: the three input or hidden weight matrices; biases stay with the host
    """
    half = kind.half
    if kind in (ComponentKind.ENCODER, ComponentKind.DECODER):
        return [n for n in tensor_names() if n.startswith(f"{half}.")]
    if kind in (ComponentKind.ENCODER_EMBEDDING, ComponentKind.DECODER_EMBEDDING):
        return [f"{half}.embedding"]
    slots = INPUT_WEIGHTS if kind.value.endswith("Wih") else HIDDEN_WEIGHTS
    return [f"{half}.gru.{s}" for s in slots]


Source = Union[str, Path, Seq2SeqModel, Dict[str, np.ndarray]]


def _tensors_of(source: Source) -> Dict[str, np.ndarray]:
    if isinstance(source, Seq2SeqModel):
        return {n: p.value for n, p in source.named_parameters().items()}
    if isinstance(source, dict):
        return source
    return read_tensors(Path(source))[1]


def extract_component(source: Source, kind: ComponentKind) -> Dict[str, np.ndarray]:
    """Copies of the component's tensors from a checkpoint path, a model or a tensor dict."""
    tensors = _tensors_of(source)
    names = component_tensors(kind)
    missing = [n for n in names if n not in tensors]
    if missing:
        raise AblationError(f"{kind.value}: source has no tensors {missing}")
    return {n: np.array(tensors[n], dtype=np.float64, copy=True) for n in names}


def implant(model: Seq2SeqModel, component: Dict[str, np.ndarray], freeze: bool = True) -> Seq2SeqModel:
    """Overwrite the host's tensors in place; architectures must match exactly."""
    params = model.named_parameters()
    for name, value in component.items():
        if name not in params:
            raise AblationError(f"host has no tensor {name!r}")
        if params[name].value.shape != value.shape:
            raise AblationError(
                f"{name}: donor shape {value.shape} does not fit host shape {params[name].value.shape}"
            )
    for name, value in component.items():
        params[name].value[...] = value
        params[name].frozen = freeze
    return model


def component_intact(model: Seq2SeqModel, component: Dict[str, np.ndarray]) -> bool:
    params = model.named_parameters()
    return all(np.array_equal(params[n].value, v) for n, v in component.items())


# ============================================================
# Substitution cells
# ============================================================
@dataclass
class SwapResult:
    host_mode: str
    component: str
    seed: int
    status: str = "ok"
    accuracies: Dict[str, float] = field(default_factory=dict)
    best_epoch: int = 0
    donor_intact: bool = True
    reason: Optional[str] = None

    def to_dict(self) -> Dict:
        return asdict(self)


def swap_cell(host_path: Path, donor_path: Path, kind: ComponentKind, bundle: DatasetBundle,
              training: TrainingConfig, seed: int) -> SwapResult:
    """
    One (host, component, seed) cell.

    Divergence does not propagate: the cell comes back with status "diverged".
    """
    host = load_checkpoint(host_path)
    donor_mode = read_tensors(donor_path)[0]["mode"]
    if donor_mode == host.mode:
        raise AblationError(f"donor and host are both {host.mode} models; a swap needs opposite modes")

    component = extract_component(donor_path, kind)
    implant(host, component, freeze=True)
    cfg = replace(training, seed=seed)
    result = SwapResult(host_mode=host.mode, component=kind.value, seed=seed)

    try:
        trained = train(host, bundle, cfg, make_rng(seed, f"swap/{kind.value}"))
        result.best_epoch = trained.best_epoch
    except NumericalError as e:
        logger.warning("swap %s <- %s seed %d diverged: %s", host.mode, kind.value, seed, e)
        result.status, result.reason = "diverged", str(e)
        return result

    result.donor_intact = component_intact(host, component)
    if not result.donor_intact:
        logger.error("swap %s <- %s seed %d: frozen component changed during retraining",
                     host.mode, kind.value, seed)
    result.accuracies = evaluate_splits(host, bundle)
    logger.info("swap %s <- %s seed %d: NC %.3f", host.mode, kind.value, seed, result.accuracies["NC"])
    return result


def substitute_and_retrain(
    host_path: Path,
    donor_path: Path,
    kind: ComponentKind,
    bundle: DatasetBundle,
    epochs: int = 100,
    lr: float = SWAP_LR,
    seeds: Sequence[int] = (0, 1, 2),
    training: Optional[TrainingConfig] = None,
    n_jobs: int = 1,
) -> List[SwapResult]:
    """Per-seed evaluations of the host with the donor's frozen component."""
    training = replace(training or TrainingConfig(), epochs=epochs, lr=lr)
    jobs = (delayed(swap_cell)(Path(host_path), Path(donor_path), kind, bundle, training, s) for s in seeds)
    return list(Parallel(n_jobs=n_jobs)(jobs))
