# seq2seq/config.py
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict

from numcore.errors import ConfigError

MODES = ("baseline", "ag")
MAX_EPOCHS = 100


def _from_dict(cls, d: Dict[str, Any]):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    return cls(**d)


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 16
    hidden_dim: int = 512
    attn_dim: int = 512
    init_scale: float = 0.08

    def __post_init__(self):
        for name in ("embed_dim", "hidden_dim", "attn_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"ModelConfig.{name} must be positive")
        if self.init_scale < 0:
            raise ConfigError("ModelConfig.init_scale must be >= 0")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ModelConfig":
        return _from_dict(cls, d)


@dataclass(frozen=True)
class TrainingConfig:
    """
    Training hyperparameters.

    - ag_weight: weight of the attention loss in AG mode (baseline always uses 0)
    - val_frac: share of training examples carved out for model selection
    - selection: "best_val" keeps the epoch with the best validation accuracy
      (earliest on ties), "last" keeps the final epoch
    """
    epochs: int = MAX_EPOCHS
    lr: float = 0.001
    batch_size: int = 1
    ag_weight: float = 1.0
    seed: int = 0
    val_frac: float = 0.1
    selection: str = "best_val"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    progress: bool = False

    def __post_init__(self):
        if not 0 <= self.epochs <= MAX_EPOCHS:
            raise ConfigError(f"epochs must be in [0, {MAX_EPOCHS}], got {self.epochs}")
        if self.lr <= 0 or self.batch_size < 1:
            raise ConfigError("lr must be > 0 and batch_size >= 1")
        if not 0 <= self.val_frac < 1:
            raise ConfigError("val_frac must be in [0, 1)")
        if self.selection not in ("best_val", "last"):
            raise ConfigError(f"unknown selection rule {self.selection!r}")

    def loss_weight(self, mode: str) -> float:
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
        return self.ag_weight if mode == "ag" else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TrainingConfig":
        return _from_dict(cls, d)
