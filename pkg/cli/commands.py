# cli/commands.py
"""
Pipeline steps behind the command-line surface.

Every step takes explicit arguments, writes all of its outputs under `out`
and finishes with a manifest.json there. `reproduce` is built from the same
steps, so running it equals running the commands one by one.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from numcore.errors import UsageError
from numcore.fileio import atomic_write_json
from numcore.matrix import make_rng
from ablate.components import ComponentKind, substitute_and_retrain
from ablate.prune import (
    DEFAULT_KEEP_FRAC,
    RETRAIN_EPOCHS,
    prune_and_evaluate,
    retrain_pruned,
    save_pruned,
)
from analysis import activations, probes, render, weights
from analysis.traces import TraceSet, capture_traces, load_traces, save_traces
from cli.config import ExperimentConfig
from cli.manifest import write_manifest
from cli.report import substitution_frame, write_csv
from seq2seq.checkpoint import load_checkpoint, read_manifest, read_tensors, save_checkpoint
from seq2seq.model import init_model
from seq2seq.train import evaluate_splits, train
from taskgen.dataset_io import read_dataset, write_dataset
from taskgen.splits import SHORT_NAMES, TEST_SPLITS, DatasetBundle, generate_bundle

logger = logging.getLogger(__name__)

CHECKPOINT = "model.json"

HEATMAP_MATRICES = ("encoder.embedding", "decoder.embedding", "encoder.gru.W_hh", "decoder.gru.W_hh")
GRAPH_MATRICES = {
    "encoder.gru.W_hz": weights.ENCODER_THRESHOLD,
    "decoder.gru.W_iz": weights.DECODER_THRESHOLD,
}
GATE_ARRAYS = ("enc_z", "enc_r", "dec_z", "dec_r")
HIDDEN_ARRAYS = ("enc_h", "dec_h")


def checkpoint_path(path: Path) -> Path:
    """Accept either a run directory or the manifest file itself."""
    path = Path(path)
    return path / CHECKPOINT if path.is_dir() else path


def load_bundle(data: Optional[Path], seed: int = 0, include_atomic: bool = True,
                checkpoint: Optional[Path] = None) -> DatasetBundle:
    """
    The dataset at data, or else regenerated.

    When regenerating, a checkpoint that recorded its data seed wins over the
    seed argument.
    """
    if data is not None:
        return read_dataset(Path(data))
    if checkpoint is not None:
        extra = read_manifest(checkpoint_path(checkpoint)).get("extra") or {}
        seed = int(extra.get("data_seed", seed))
        include_atomic = bool(extra.get("include_atomic", include_atomic))
    logger.info("no --data given; generating the dataset from seed %d", seed)
    return generate_bundle(seed, include_atomic)


def resolve_splits(names: Optional[Sequence[str]]) -> List[str]:
    """Split names from long or short form; None or 'all' means the four test splits."""
    if not names or list(names) == ["all"]:
        return list(TEST_SPLITS)
    by_short = {v: k for k, v in SHORT_NAMES.items()}
    out = []
    for n in names:
        long = by_short.get(n.upper(), n)
        if long not in TEST_SPLITS and long != "train":
            raise UsageError(f"unknown split {n!r}")
        out.append(long)
    return out


# ============================================================
# gen-data / train / eval / trace
# ============================================================
def gen_data(seed: int, out: Path, include_atomic: bool = True) -> DatasetBundle:
    bundle = generate_bundle(seed, include_atomic)
    write_dataset(bundle, out)
    write_manifest(out, "gen-data", {"seed": seed, "include_atomic": include_atomic}, seed=seed)
    return bundle


def train_model(config: ExperimentConfig, mode: str, seed: int, bundle: DatasetBundle, out: Path) -> Dict:
    """Train one model; writes model.json/.bin, history.json and eval.json."""
    out = Path(out)
    training = replace(config.training, seed=seed)
    model = init_model(config.model, bundle.vocabulary, mode, make_rng(seed, "init"))
    result = train(model, bundle, training, make_rng(seed, "train"))

    save_checkpoint(model, out / CHECKPOINT, training=training.to_dict(),
                    extra={"seed": seed, "best_epoch": result.best_epoch,
                           "data_seed": bundle.seed, "include_atomic": bundle.include_atomic})
    atomic_write_json(out / "history.json", {
        "mode": mode,
        "seed": seed,
        "best_epoch": result.best_epoch,
        "best_val_accuracy": result.best_val_accuracy,
        "n_fit": result.n_fit,
        "n_val": result.n_val,
        "epochs": result.history_dicts(),
    })
    accuracies = evaluate_splits(model, bundle)
    atomic_write_json(out / "eval.json", accuracies)
    write_manifest(out, "train", config.to_dict(), seed=seed, extra={"mode": mode})
    logger.info("%s seed %d: %s", mode, seed, accuracies)
    return {"mode": mode, "seed": seed, "best_epoch": result.best_epoch, "accuracies": accuracies}


def eval_checkpoint(checkpoint: Path, bundle: DatasetBundle, splits: Optional[Sequence[str]] = None,
                    out: Optional[Path] = None) -> Dict[str, float]:
    model = load_checkpoint(checkpoint_path(checkpoint))
    accuracies = evaluate_splits(model, bundle, resolve_splits(splits))
    if out is not None:
        atomic_write_json(Path(out) / "eval.json", accuracies)
        write_manifest(out, "eval", {"checkpoint": str(checkpoint), "splits": list(accuracies)})
    return accuracies


def trace_checkpoint(checkpoint: Path, bundle: DatasetBundle, out: Path,
                     splits: Optional[Sequence[str]] = None) -> TraceSet:
    """Traces of every example of the chosen test splits, ids prefixed by split (HI0, NC3, ...)."""
    model = load_checkpoint(checkpoint_path(checkpoint))
    traces = TraceSet()
    for name in resolve_splits(splits):
        traces.traces.extend(capture_traces(model, bundle.split(name), prefix=SHORT_NAMES.get(name, name)))
    save_traces(traces, out)
    write_manifest(out, "trace", {"checkpoint": str(checkpoint), "splits": resolve_splits(splits)})
    logger.info("captured %d traces", len(traces))
    return traces


# ============================================================
# analyze
# ============================================================
@dataclass
class AnalyzeOptions:
    matrices: Sequence[str] = ()
    threshold: Optional[float] = None
    gate: str = "both"
    arrays: Sequence[str] = ()
    k: int = 50
    seed: int = 0
    svg: bool = True
    probe: probes.ProbeConfig = field(default_factory=probes.ProbeConfig)


class AnalysisInputs:
    """Lazily loaded checkpoint tensors and traces for one analyze call."""

    def __init__(self, traces: Optional[Path] = None, checkpoint: Optional[Path] = None,
                 data: Optional[Path] = None):
        self.traces_path = Path(traces) if traces else None
        self.checkpoint = checkpoint_path(checkpoint) if checkpoint else None
        self.data = data
        self._tensors = None
        self._traces = None

    @property
    def tensors(self) -> Dict[str, np.ndarray]:
        if self._tensors is None:
            if self.checkpoint is None:
                raise UsageError("this analysis needs --checkpoint")
            self._tensors = read_tensors(self.checkpoint)[1]
        return self._tensors

    @property
    def traces(self) -> TraceSet:
        if self._traces is None:
            if self.traces_path is not None:
                self._traces = load_traces(self.traces_path)
            elif self.checkpoint is not None:
                model = load_checkpoint(self.checkpoint)
                bundle = load_bundle(self.data, checkpoint=self.checkpoint)
                self._traces = capture_traces(model, bundle.test_examples())
            else:
                raise UsageError("this analysis needs --traces or --checkpoint")
        return self._traces

    def strengths(self, half: str) -> Optional[np.ndarray]:
        if self.checkpoint is None:
            return None
        return weights.neuron_strength(self.tensors, half)


def _heatmaps(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    summary = {}
    for name in opts.matrices or HEATMAP_MATRICES:
        path = weights.export_heatmap(name, inputs.tensors, out)
        grid, rows, cols = weights.heatmap_grid(name, inputs.tensors[name])
        if opts.svg:
            render.render_heatmap(grid, path.with_suffix(".svg"), title=name, rows=rows, cols=cols)
        summary[name] = {"csv": path.name, "row_mean_abs": weights.row_mean_abs(grid).tolist()}
    return summary


def _graphs(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    chosen = {m: opts.threshold if opts.threshold is not None else GRAPH_MATRICES.get(m, weights.ENCODER_THRESHOLD)
              for m in (opts.matrices or GRAPH_MATRICES)}
    summary = {}
    for name, threshold in chosen.items():
        if name not in inputs.tensors:
            raise UsageError(f"unknown tensor {name!r}")
        cg = weights.connectivity_graph(inputs.tensors[name], threshold, name)
        weights.write_dot(cg, out / f"graph_{name.replace('.', '_')}.dot")
        summary[name] = {"threshold": threshold, **cg.degree_stats()}
    return summary


def _saturation(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    summary = {}
    for array in opts.arrays or GATE_ARRAYS:
        stats = activations.gate_saturation(inputs.traces, array)
        write_csv(stats.to_frame(), out / f"saturation_{array}.csv")
        if opts.svg:
            render.render_saturation(stats, out / f"saturation_{array}.svg")
        summary[array] = {
            "observations": stats.observations,
            "right_saturated_share": stats.right_saturated_share(),
            "mean_left": float(np.mean(stats.left)),
            "mean_right": float(np.mean(stats.right)),
        }
    return summary


def _distributions(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    summary = {}
    for array in opts.arrays or HIDDEN_ARRAYS:
        dist = activations.activation_distributions(inputs.traces, make_rng(opts.seed, f"dists/{array}"), array, opts.k)
        write_csv(dist, out / f"dists_{array}.csv")
        if opts.svg:
            render.render_distributions(dist, out / f"dists_{array}.svg", title=array)
        summary[array] = {
            "units": int(len(dist)),
            "narrow_units": int(len(activations.narrow_units(dist))),
            "median_range": float(dist["range"].median()),
        }
    return summary


def _save_probe(report: probes.ProbeReport, probe: probes.LinearProbe, out: Path) -> Dict:
    stem = "probe_" + report.name.replace("[", "_").replace("]", "")
    atomic_write_json(out / f"{stem}.json", report.to_dict())
    probes.save_probe(probe, out / f"{stem}.joblib")
    return report.to_dict()


def _probe_table(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    report, probe = probes.table_probe(inputs.traces, opts.probe, "enc_h", inputs.strengths("encoder"))
    summary = {report.name: _save_probe(report, probe, out)}
    control, cprobe = probes.shuffled_table_probe(inputs.traces, opts.probe, make_rng(opts.seed, "probe/shuffle"))
    summary[control.name] = _save_probe(control, cprobe, out)
    return summary


def _probe_timestep(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    report, probe = probes.timestep_probe(inputs.traces, opts.probe, inputs.strengths("encoder"))
    return {report.name: _save_probe(report, probe, out)}


def _probe_gate(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    gates = ("update", "reset") if opts.gate == "both" else (opts.gate,)
    summary = {}
    for gate in gates:
        report, probe = probes.gate_probe(inputs.traces, opts.probe, gate, inputs.strengths("decoder"))
        summary[report.name] = _save_probe(report, probe, out)
    return summary


def _polarity(inputs: AnalysisInputs, out: Path, opts: AnalyzeOptions) -> Dict:
    return {half: weights.gate_polarity_correlation(inputs.tensors, half) for half in weights.HALVES}


ANALYZERS = {
    "heatmap": _heatmaps,
    "graph": _graphs,
    "saturation": _saturation,
    "dists": _distributions,
    "probe-table": _probe_table,
    "probe-timestep": _probe_timestep,
    "probe-gate": _probe_gate,
    "polarity": _polarity,
}


def analyze(what: Sequence[str], out: Path, traces: Optional[Path] = None, checkpoint: Optional[Path] = None,
            data: Optional[Path] = None, options: Optional[AnalyzeOptions] = None) -> Dict:
    """Run each requested analysis; a <what>.json summary per analysis lands in out."""
    unknown = [w for w in what if w not in ANALYZERS]
    if unknown:
        raise UsageError(f"unknown analyses {unknown}; expected some of {list(ANALYZERS)}")
    out = Path(out)
    opts = options or AnalyzeOptions()
    inputs = AnalysisInputs(traces, checkpoint, data)

    results = {}
    for w in what:
        logger.info("analyze %s", w)
        results[w] = ANALYZERS[w](inputs, out, opts)
        atomic_write_json(out / f"{w}.json", results[w])
    write_manifest(out, "analyze", {
        "what": list(what),
        "traces": str(traces) if traces else None,
        "checkpoint": str(checkpoint) if checkpoint else None,
        "k": opts.k,
        "seed": opts.seed,
        "probe": asdict(opts.probe),
    }, seed=opts.seed)
    return results


# ============================================================
# swap / prune
# ============================================================
def swap(host: Path, donor: Path, components: Sequence[ComponentKind], bundle: DatasetBundle, out: Path,
         seeds: Sequence[int] = (0, 1, 2), epochs: int = 100, lr: float = 0.001,
         config: Optional[ExperimentConfig] = None, n_jobs: int = 1) -> List[Dict]:
    config = config or ExperimentConfig()
    results = []
    host_mode = read_tensors(checkpoint_path(host))[0]["mode"]
    unswapped = evaluate_splits(load_checkpoint(checkpoint_path(host)), bundle)
    for kind in components:
        cell = substitute_and_retrain(checkpoint_path(host), checkpoint_path(donor), kind, bundle,
                                      epochs=epochs, lr=lr, seeds=seeds, training=config.training, n_jobs=n_jobs)
        results.extend(r.to_dict() for r in cell)

    atomic_write_json(Path(out) / "results.json", {"host_mode": host_mode, "unswapped": unswapped, "cells": results})
    write_csv(substitution_frame(results, {host_mode: [unswapped["NC"]]}), Path(out) / "substitution.csv")
    write_manifest(out, "swap", {
        "host": str(host), "donor": str(donor), "components": [k.value for k in components],
        "seeds": list(seeds), "epochs": epochs, "lr": lr, "training": config.training.to_dict(),
    })
    return results


def prune(checkpoint: Path, bundle: DatasetBundle, out: Path, keep_frac: float = DEFAULT_KEEP_FRAC,
          retrain_epochs: int = RETRAIN_EPOCHS, force: bool = False,
          config: Optional[ExperimentConfig] = None) -> Dict:
    """Mask, evaluate, retrain with the mask pinned, evaluate again."""
    out = Path(out)
    config = config or ExperimentConfig()
    manifest, _ = read_tensors(checkpoint_path(checkpoint))
    model = load_checkpoint(checkpoint_path(checkpoint))
    extra = manifest.get("extra") or {}
    seed = extra.get("seed", config.training.seed)
    source = {k: v for k, v in extra.items() if k in ("seed", "data_seed", "include_atomic")}
    training = replace(config.training, seed=seed)

    pruned, mask, result = prune_and_evaluate(model, bundle, keep_frac, force=force)
    save_pruned(pruned, mask, out / "pruned" / CHECKPOINT, extra=source)
    if retrain_epochs > 0:
        _, _, preserved = retrain_pruned(pruned, mask, bundle, training, retrain_epochs)
        result.after_retrain = evaluate_splits(pruned, bundle)
        result.mask_preserved = preserved
        result.retrain_epochs = retrain_epochs
        save_pruned(pruned, mask, out / "retrained" / CHECKPOINT, training=training.to_dict(), extra=source)

    summary = {"seed": seed, **result.to_dict(), "mask": mask.to_dict()}
    atomic_write_json(out / "results.json", summary)
    write_manifest(out, "prune", {
        "checkpoint": str(checkpoint), "keep_frac": keep_frac, "retrain_epochs": retrain_epochs,
        "force": force, "training": training.to_dict(),
    }, seed=seed)
    return summary
