# seq2seq/checkpoint.py
"""
Checkpoint = JSON manifest + raw little-endian float64 blob.

    model.json   {"tensors": [{"name", "shape", "dtype", "offset", "nbytes", "frozen"}], ...}
    model.bin    tensors back to back in manifest order
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from numcore.errors import ValidationError
from numcore.fileio import atomic_write_bytes, atomic_write_json
from numcore.matrix import make_rng
from seq2seq.config import ModelConfig
from seq2seq.model import Seq2SeqModel, init_model, tensor_names
from taskgen.vocab import Vocabulary

FORMAT_VERSION = 1
DTYPE = "<f8"


class CheckpointError(ValidationError):
    pass


def blob_path(manifest_path: Path) -> Path:
    return Path(manifest_path).with_suffix(".bin")


def save_checkpoint(model: Seq2SeqModel, path: Path,
                    training: Optional[Dict[str, Any]] = None,
                    extra: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    params = model.named_parameters()
    chunks, tensors, offset = [], [], 0
    for name in tensor_names():
        data = np.ascontiguousarray(params[name].value, dtype=DTYPE).tobytes()
        tensors.append({
            "name": name,
            "shape": list(params[name].value.shape),
            "dtype": "f64",
            "offset": offset,
            "nbytes": len(data),
            "frozen": params[name].frozen,
        })
        chunks.append(data)
        offset += len(data)

    blob = blob_path(path)
    atomic_write_bytes(blob, b"".join(chunks))
    manifest = {
        "format_version": FORMAT_VERSION,
        "mode": model.mode,
        "model_config": model.config.to_dict(),
        "vocabulary": model.vocab.to_dict(),
        "training_config": training,
        "extra": extra or {},
        "blob": blob.name,
        "tensors": tensors,
    }
    atomic_write_json(path, manifest)
    return path


def read_manifest(path: Path) -> Dict[str, Any]:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path}: invalid manifest JSON ({e.msg})") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format_version {manifest.get('format_version')!r}")
    return manifest


def read_tensors(path: Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Manifest and name -> array, without building a model."""
    path = Path(path)
    manifest = read_manifest(path)
    raw = (path.parent / manifest["blob"]).read_bytes()
    tensors = {}
    for t in manifest["tensors"]:
        end = t["offset"] + t["nbytes"]
        if t["dtype"] != "f64" or end > len(raw):
            raise CheckpointError(f"{path}: tensor {t['name']} is truncated or has dtype {t['dtype']}")
        arr = np.frombuffer(raw[t["offset"]:end], dtype=DTYPE).astype(np.float64)
        tensors[t["name"]] = arr.reshape(t["shape"])
    return manifest, tensors


def load_checkpoint(path: Path) -> Seq2SeqModel:
    manifest, tensors = read_tensors(path)
    config = ModelConfig.from_dict(manifest["model_config"])
    vocab = Vocabulary.from_dict(manifest["vocabulary"])
    # values are overwritten below; the rng only fills the shapes
    model = init_model(config, vocab, manifest["mode"], make_rng(0, "checkpoint"))

    params = model.named_parameters()
    if set(tensors) != set(params):
        raise CheckpointError(
            f"{path}: tensor names differ from the architecture: "
            f"missing {sorted(set(params) - set(tensors))}, unexpected {sorted(set(tensors) - set(params))}"
        )
    frozen = {t["name"]: bool(t.get("frozen", False)) for t in manifest["tensors"]}
    for name, p in params.items():
        if tensors[name].shape != p.value.shape:
            raise CheckpointError(f"{path}: {name} has shape {tensors[name].shape}, expected {p.value.shape}")
        p.value[...] = tensors[name]
        p.frozen = frozen[name]
    return model
