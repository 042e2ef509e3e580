# analysis/traces.py
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from numcore.errors import ValidationError
from numcore.fileio import atomic_write_bytes, atomic_write_json
from seq2seq.model import Seq2SeqModel, run_inference
from taskgen.splits import Example

ARRAYS = ("enc_h", "enc_z", "enc_r", "dec_h", "dec_z", "dec_r", "attention")


@dataclass
class ActivationTrace:
    """
    Per-step activations for one example.

    Encoder arrays are N x hidden, decoder arrays T x hidden, attention T x N.
    enc_tables[i] / dec_tables[t] name the table being processed at that step
    (None for the binary-string step, the copy step and the EOS step).
    """
    example_id: str
    input: Tuple[str, ...]
    enc_h: np.ndarray
    enc_z: np.ndarray
    enc_r: np.ndarray
    dec_h: np.ndarray
    dec_z: np.ndarray
    dec_r: np.ndarray
    attention: np.ndarray
    output: Tuple[str, ...] = ()

    @property
    def enc_tables(self) -> List[Optional[str]]:
        return [None] + list(self.input[1:])

    @property
    def dec_tables(self) -> List[Optional[str]]:
        steps = self.dec_h.shape[0]
        labels: List[Optional[str]] = [None] + list(self.input[1:])
        return (labels + [None] * steps)[:steps]


def trace_example(model: Seq2SeqModel, example: Example, example_id: str) -> ActivationTrace:
    run = run_inference(model, example.input, n_steps=len(example.target))
    enc, steps = run.encoder.caches, run.steps
    return ActivationTrace(
        example_id=example_id,
        input=tuple(example.input),
        enc_h=np.stack([c.h for c in enc]),
        enc_z=np.stack([c.z for c in enc]),
        enc_r=np.stack([c.r for c in enc]),
        dec_h=np.stack([s.gru.h for s in steps]),
        dec_z=np.stack([s.gru.z for s in steps]),
        dec_r=np.stack([s.gru.r for s in steps]),
        attention=np.stack([s.attn.weights for s in steps]),
        output=tuple(run.tokens),
    )


@dataclass
class TraceSet:
    traces: List[ActivationTrace] = field(default_factory=list)

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def rows(self, array: str) -> np.ndarray:
        """All steps of all traces stacked: (sum of steps) x hidden."""
        return np.concatenate([getattr(t, array) for t in self.traces], axis=0)

    def table_rows(self, array: str) -> Tuple[np.ndarray, np.ndarray]:
        """Rows of steps that process a table, with the table name as label."""
        side = "enc_tables" if array.startswith("enc") else "dec_tables"
        X, y = [], []
        for t in self.traces:
            acts = getattr(t, array)
            for step, label in enumerate(getattr(t, side)):
                if label is not None:
                    X.append(acts[step])
                    y.append(label)
        return np.array(X), np.array(y)

    def timestep_rows(self, array: str = "enc_h") -> Tuple[np.ndarray, np.ndarray]:
        """Every step's activations labelled with its step index."""
        X = self.rows(array)
        y = np.concatenate([np.arange(getattr(t, array).shape[0]) for t in self.traces])
        return X, y


def capture_traces(model: Seq2SeqModel, examples: Sequence[Example], prefix: str = "ex") -> TraceSet:
    return TraceSet([trace_example(model, ex, f"{prefix}{i}") for i, ex in enumerate(examples)])


# ============================================================
# Archives: traces.json + one .npy per array kind
# ============================================================
def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, arr, allow_pickle=False)
    return buf.getvalue()


def save_traces(traces: TraceSet, path: Path) -> Path:
    path = Path(path)
    meta = {
        "count": len(traces),
        "examples": [
            {
                "id": t.example_id,
                "input": list(t.input),
                "output": list(t.output),
                "enc_steps": int(t.enc_h.shape[0]),
                "dec_steps": int(t.dec_h.shape[0]),
            }
            for t in traces
        ],
    }
    for name in ARRAYS:
        if name == "attention":
            # ragged T x N blocks, flattened
            data = np.concatenate([t.attention.ravel() for t in traces]) if len(traces) else np.zeros(0)
        else:
            data = traces.rows(name)
        atomic_write_bytes(path / f"{name}.npy", _npy_bytes(np.ascontiguousarray(data)))
    atomic_write_json(path / "traces.json", meta)
    return path


def load_traces(path: Path) -> TraceSet:
    path = Path(path)
    try:
        meta = json.loads((path / "traces.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"{path}: not a trace archive (traces.json missing)") from None
    arrays: Dict[str, np.ndarray] = {name: np.load(path / f"{name}.npy") for name in ARRAYS}

    traces, enc_at, dec_at, attn_at = [], 0, 0, 0
    for ex in meta["examples"]:
        n, T = ex["enc_steps"], ex["dec_steps"]
        traces.append(ActivationTrace(
            example_id=ex["id"],
            input=tuple(ex["input"]),
            output=tuple(ex["output"]),
            enc_h=arrays["enc_h"][enc_at:enc_at + n],
            enc_z=arrays["enc_z"][enc_at:enc_at + n],
            enc_r=arrays["enc_r"][enc_at:enc_at + n],
            dec_h=arrays["dec_h"][dec_at:dec_at + T],
            dec_z=arrays["dec_z"][dec_at:dec_at + T],
            dec_r=arrays["dec_r"][dec_at:dec_at + T],
            attention=arrays["attention"][attn_at:attn_at + T * n].reshape(T, n),
        ))
        enc_at, dec_at, attn_at = enc_at + n, dec_at + T, attn_at + T * n
    if len(traces) != meta["count"]:
        raise ValidationError(f"{path}: archive lists {meta['count']} traces, found {len(traces)}")
    return TraceSet(traces)
