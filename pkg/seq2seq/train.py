# seq2seq/train.py
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence

import numpy as np
from tqdm import tqdm

from numcore.errors import DivergenceError
from numcore.gradcheck import grad_check
from numcore.matrix import Diagnostics, Rng, check_finite, make_rng
from numcore.optim import AdamState, adam_step
from numcore.params import backward
from seq2seq.backprop import BatchGraph
from seq2seq.config import TrainingConfig
from seq2seq.model import Seq2SeqModel
from taskgen.splits import SHORT_NAMES, TEST_SPLITS, DatasetBundle, Example, carve_validation
from taskgen.vocab import EOS

logger = logging.getLogger(__name__)


# ============================================================
# Evaluation
# ============================================================
class Decoder(Protocol):
    def predict(self, tokens: Sequence[str]) -> List[str]: ...


def sequence_correct(predicted: Sequence[str], target: Sequence[str]) -> bool:
    expected = [t for t in target if t != EOS]
    return list(predicted) == expected


def evaluate(decoder: Decoder, examples: Sequence[Example]) -> float:
    """Sequence accuracy: share of examples whose greedy output before EOS equals the target."""
    if not examples:
        return 0.0
    hits = sum(sequence_correct(decoder.predict(ex.input), ex.target) for ex in examples)
    return hits / len(examples)


def evaluate_splits(decoder: Decoder, bundle: DatasetBundle,
                    splits: Sequence[str] = TEST_SPLITS) -> Dict[str, float]:
    """Accuracy per split, keyed by short name (HI, HC, HT, NC)."""
    return {SHORT_NAMES.get(name, name): evaluate(decoder, bundle.split(name)) for name in splits}


# ============================================================
# Training
# ============================================================
@dataclass
class EpochRecord:
    epoch: int
    loss: float
    token_loss: float
    attention_loss: float
    val_accuracy: float
    floor_hits: int = 0


@dataclass
class TrainResult:
    model: Seq2SeqModel
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    n_fit: int = 0
    n_val: int = 0

    def history_dicts(self) -> List[Dict]:
        return [asdict(r) for r in self.history]


def snapshot(model: Seq2SeqModel) -> Dict[str, np.ndarray]:
    return {name: p.value.copy() for name, p in model.named_parameters().items()}


def restore(model: Seq2SeqModel, values: Dict[str, np.ndarray]) -> None:
    for name, p in model.named_parameters().items():
        p.value[...] = values[name]


def train(
    model: Seq2SeqModel,
    bundle: DatasetBundle,
    config: TrainingConfig,
    rng: Optional[Rng] = None,
    train_examples: Optional[Sequence[Example]] = None,
) -> TrainResult:
    """
    Teacher-forced Adam training.

    After every epoch the validation accuracy (carved out of the training
    split) is measured; with selection "best_val" the returned model holds
    the parameters of the best epoch, earliest epoch winning ties.

    The model is updated in place. Frozen and masked parameters are honoured
    by backward()/adam_step().
    """
    rng = rng if rng is not None else make_rng(config.seed, "train")
    pool = list(train_examples) if train_examples is not None else bundle.train
    fit, val = carve_validation(pool, config.val_frac, rng)
    weight = config.loss_weight(model.mode)
    params = model.named_parameters()
    state = AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2, epsilon=config.epsilon)

    result = TrainResult(model=model, n_fit=len(fit), n_val=len(val))
    best_values = None
    best_acc = -1.0

    logger.info("training %s model: %d fit / %d val examples, %d epochs, lr=%g, ag_weight=%g",
                model.mode, len(fit), len(val), config.epochs, config.lr, weight)

    epochs = range(1, config.epochs + 1)
    for epoch in tqdm(epochs, desc=f"train[{model.mode}]", disable=not config.progress):
        order = rng.permutation(len(fit))
        diagnostics = Diagnostics()
        totals = np.zeros(3)

        for start in range(0, len(order), config.batch_size):
            batch = [fit[int(i)] for i in order[start:start + config.batch_size]]
            graph = BatchGraph(model, batch, weight, diagnostics)
            if not math.isfinite(graph.loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, example {start}: {graph.loss}",
                    epoch=epoch, index=start,
                )
            totals += np.array([graph.loss, graph.token_loss, graph.attention_loss]) * len(batch)
            backward(graph)
            adam_step(params, state)

        for name, p in params.items():
            check_finite(f"{name} after epoch {epoch}", p.value)
        totals /= max(len(fit), 1)
        val_acc = evaluate(model, val) if val else evaluate(model, fit)
        result.history.append(EpochRecord(
            epoch=epoch,
            loss=float(totals[0]),
            token_loss=float(totals[1]),
            attention_loss=float(totals[2]),
            val_accuracy=val_acc,
            floor_hits=diagnostics.floor_hits,
        ))

        if val_acc > best_acc:
            best_acc = val_acc
            result.best_epoch = epoch
            if config.selection == "best_val":
                best_values = snapshot(model)

        logger.info("epoch %3d  loss %.4f  (token %.4f, attention %.4f)  val acc %.3f  best %.3f @ %d",
                    epoch, totals[0], totals[1], totals[2], val_acc, best_acc, result.best_epoch)

    if config.selection == "best_val" and best_values is not None:
        restore(model, best_values)
    elif result.history:
        result.best_epoch = result.history[-1].epoch
        best_acc = result.history[-1].val_accuracy
    result.best_val_accuracy = max(best_acc, 0.0)
    return result


# ============================================================
# Gradient verification
# ============================================================
def model_grad_check(model: Seq2SeqModel, batch: Sequence[Example], rng: Rng,
                     eps: float = 1e-5, ag_weight: Optional[float] = None, samples: int = 200):
    """Central-difference check of the full model gradient on a batch."""
    if ag_weight is None:
        ag_weight = 1.0 if model.mode == "ag" else 0.0
    return grad_check(
        model.named_parameters(),
        lambda: BatchGraph(model, list(batch), ag_weight),
        rng,
        eps=eps,
        samples=samples,
    )
