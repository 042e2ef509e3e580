# cli/config.py
"""
Experiment configuration.

Precedence, lowest first:
- built-in defaults
- environment (LOOKUP_LAB_OUT, LOOKUP_LAB_WORKERS; .env is honoured)
- JSON config file
- command-line flags
"""
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from numcore.errors import ConfigError
from numcore.fileio import atomic_write_bytes, canonical_json_bytes, sha256_hex
from analysis.probes import ProbeConfig
from cli import settings
from seq2seq.config import MODES, ModelConfig, TrainingConfig

SCHEMA_VERSION = 1
MODE_CHOICES = MODES + ("both",)


def _check_keys(name: str, d: Dict[str, Any], known) -> None:
    unknown = set(d) - set(known)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")


def _probe_from_dict(d: Dict[str, Any]) -> ProbeConfig:
    _check_keys("probe", d, {f.name for f in fields(ProbeConfig)})
    return ProbeConfig(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    mode: str = "both"
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    data_seed: int = 0
    include_atomic: bool = True
    out: str = settings.DEFAULT_OUT
    n_jobs: int = 1
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    # analysis toggles
    heatmaps: bool = True
    graphs: bool = True
    distributions: bool = True
    saturation: bool = True
    probes: bool = True
    render_svg: bool = True
    distribution_units: int = 50

    # ablation
    swaps: bool = True
    swap_seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    swap_epochs: int = 100
    swap_lr: float = 0.001
    prune: bool = True
    prune_keep_frac: float = 0.05
    prune_retrain_epochs: int = 20

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}")
        if self.mode not in MODE_CHOICES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODE_CHOICES}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"duplicate seeds in {self.seeds}")
        if not 0 < self.prune_keep_frac <= 1:
            raise ConfigError("prune_keep_frac must be in (0, 1]")

    @property
    def modes(self) -> List[str]:
        return list(MODES) if self.mode == "both" else [self.mode]

    # ============================================================
    # Serialization
    # ============================================================
    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        d["training"] = self.training.to_dict()
        d["probe"] = asdict(self.probe)
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        _check_keys("ExperimentConfig", d, {f.name for f in fields(cls)})
        d = dict(d)
        if "model" in d:
            d["model"] = ModelConfig.from_dict(d["model"])
        if "training" in d:
            d["training"] = TrainingConfig.from_dict(d["training"])
        if "probe" in d:
            d["probe"] = _probe_from_dict(d["probe"])
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def canonical_bytes(self) -> bytes:
        return canonical_json_bytes(self.to_dict())

    def config_hash(self) -> str:
        return sha256_hex(self.canonical_bytes())

    def with_overrides(self, **flags) -> "ExperimentConfig":
        """Apply flag values; None means "not given". Dotted keys reach nested configs."""
        top: Dict[str, Any] = {}
        nested: Dict[str, Dict[str, Any]] = {"model": {}, "training": {}, "probe": {}}
        for key, value in flags.items():
            if value is None:
                continue
            if "." in key:
                section, name = key.split(".", 1)
                if section not in nested:
                    raise ConfigError(f"unknown config section {section!r}")
                nested[section][name] = value
            else:
                top[key] = value
        d = self.to_dict()
        for section, values in nested.items():
            d[section].update(values)
        d.update(top)
        return ExperimentConfig.from_dict(d)


def env_defaults() -> ExperimentConfig:
    return ExperimentConfig(out=str(settings.output_root()), n_jobs=settings.workers())


def load_config(path: Optional[Path] = None, **flags) -> ExperimentConfig:
    config = env_defaults()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        merged = config.to_dict()
        for section in ("model", "training", "probe"):
            if section in raw:
                if not isinstance(raw[section], dict):
                    raise ConfigError(f"{path}: {section} must be an object")
                merged[section].update(raw.pop(section))
        merged.update(raw)
        config = ExperimentConfig.from_dict(merged)
    return config.with_overrides(**flags)


def save_config(config: ExperimentConfig, path: Path) -> Path:
    return atomic_write_bytes(Path(path), config.canonical_bytes())
