# cli/reproduce.py
"""
End-to-end pipeline.

    <out>/config.json
    <out>/data/                              gen-data
    <out>/models/<mode>/seed<k>/             train
    <out>/traces/<mode>/seed<k>/             trace
    <out>/analysis/<mode>/seed<k>/           analyze
    <out>/swap/<host mode>_host/             swap
    <out>/prune/<mode>/seed<k>/              prune
    <out>/report/                            tables, acceptance.json, report.xlsx
"""
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List

import pandas as pd

from numcore.fileio import atomic_write_json
from ablate.components import ComponentKind
from analysis.weights import neuron_strength, top_units
from cli import report
from cli.commands import AnalyzeOptions, CHECKPOINT, analyze, gen_data, prune, swap, trace_checkpoint, train_model
from cli.config import ExperimentConfig, save_config
from cli.manifest import write_manifest
from cli.runner import run_jobs
from cli.workbook import write_workbook
from seq2seq.checkpoint import read_tensors

logger = logging.getLogger(__name__)

TABLE_PROBES = ["table[enc_h]", "table[dec_z]", "table[dec_r]", "table-shuffled[enc_h]"]
TIMESTEP_PROBES = ["timestep[enc_h]"]


def run_dir(out: Path, stage: str, mode: str, seed: int) -> Path:
    return Path(out) / stage / mode / f"seed{seed}"


def _analyses(config: ExperimentConfig) -> List[str]:
    toggles = [
        (config.heatmaps, "heatmap"),
        (config.graphs, "graph"),
        (config.saturation, "saturation"),
        (config.distributions, "dists"),
        (config.probes, "probe-table"),
        (config.probes, "probe-timestep"),
        (config.probes, "probe-gate"),
        (True, "polarity"),
    ]
    return [name for on, name in toggles if on]


def reproduce(config: ExperimentConfig, out: Path) -> Dict:
    out = Path(out)
    save_config(config, out / "config.json")
    bundle = gen_data(config.data_seed, out / "data", config.include_atomic)

    # ============================================================
    # Training, one job per (mode, seed)
    # ============================================================
    jobs, keys = [], []
    for mode in config.modes:
        for seed in config.seeds:
            jobs.append({"config": config, "mode": mode, "seed": seed, "bundle": bundle,
                         "out": run_dir(out, "models", mode, seed)})
            keys.append(f"{mode}/seed{seed}")
    outcomes = run_jobs(train_model, jobs, keys, config.n_jobs)

    evals: Dict[str, Dict[int, Dict[str, float]]] = {}
    for o in outcomes:
        if o.ok:
            evals.setdefault(o.value["mode"], {})[o.value["seed"]] = o.value["accuracies"]
    diverged = [o.to_dict() for o in outcomes if not o.ok]

    # ============================================================
    # Trace + analyze every trained model
    # ============================================================
    probes: Dict[str, Dict[int, Dict]] = {}
    saturation: Dict[str, Dict[int, float]] = {}
    graphs: Dict[str, Dict[int, Dict[str, float]]] = {}
    groups: Dict[int, List[int]] = {}
    top: Dict[int, List[int]] = {}
    what = _analyses(config)
    for mode, seeds in evals.items():
        for seed in sorted(seeds):
            ckpt = run_dir(out, "models", mode, seed) / CHECKPOINT
            traces = run_dir(out, "traces", mode, seed)
            trace_checkpoint(ckpt, bundle, traces)
            opts = AnalyzeOptions(k=config.distribution_units, seed=seed, svg=config.render_svg,
                                  probe=replace(config.probe, seed=seed))
            res = analyze(what, run_dir(out, "analysis", mode, seed), traces=traces, checkpoint=ckpt, options=opts)

            if config.probes:
                probes.setdefault(mode, {})[seed] = {**res["probe-table"], **res["probe-timestep"], **res["probe-gate"]}
                if mode == "ag":
                    groups[seed] = probes[mode][seed]["table[enc_h]"]["group"]
                    top[seed] = [int(u) for u in top_units(neuron_strength(read_tensors(ckpt)[1], "encoder"), 0.05)]
            if config.saturation:
                saturation.setdefault(mode, {})[seed] = res["saturation"]["dec_z"]["right_saturated_share"]
            if config.graphs:
                graphs.setdefault(mode, {})[seed] = {
                    name.split(".")[0]: stats["kept_fraction"] for name, stats in res["graph"].items()
                }

    # ============================================================
    # Component substitution (hosts and donors are the first seed's models)
    # ============================================================
    swaps: List[Dict] = []
    first = config.seeds[0]
    if config.swaps and all(first in evals.get(m, {}) for m in ("ag", "baseline")):
        for host_mode, donor_mode in (("ag", "baseline"), ("baseline", "ag")):
            kinds = [ComponentKind(k) for k in report.HOST_COMPONENTS[host_mode]]
            swaps.extend(swap(
                run_dir(out, "models", host_mode, first),
                run_dir(out, "models", donor_mode, first),
                kinds, bundle, out / "swap" / f"{host_mode}_host",
                seeds=config.swap_seeds, epochs=config.swap_epochs, lr=config.swap_lr,
                config=config, n_jobs=config.n_jobs,
            ))
    elif config.swaps:
        logger.warning("component swaps need a trained model of both modes for seed %d; skipped", first)

    # ============================================================
    # Pruning, one job per trained model
    # ============================================================
    pruned: List[Dict] = []
    if config.prune:
        jobs, keys = [], []
        for mode, seeds in evals.items():
            for seed in sorted(seeds):
                jobs.append({
                    "checkpoint": run_dir(out, "models", mode, seed) / CHECKPOINT,
                    "bundle": bundle,
                    "out": run_dir(out, "prune", mode, seed),
                    "keep_frac": config.prune_keep_frac,
                    "retrain_epochs": config.prune_retrain_epochs,
                    "config": config,
                })
                keys.append(f"prune/{mode}/seed{seed}")
        prune_outcomes = run_jobs(prune, jobs, keys, config.n_jobs)
        pruned = [o.value for o in prune_outcomes if o.ok]
        diverged += [o.to_dict() for o in prune_outcomes if not o.ok]

    summary = write_report(config, out / "report", evals, probes, saturation, graphs, groups, top, swaps, pruned,
                           out, diverged)
    write_manifest(out, "reproduce", config.to_dict(), seed=config.data_seed)
    return summary


def write_report(config: ExperimentConfig, report_dir: Path, evals, probes, saturation, graphs, groups, top,
                 swaps, pruned, out: Path, diverged: List[Dict]) -> Dict:
    tables: Dict[str, pd.DataFrame] = {}
    for mode, seeds in evals.items():
        tables[f"accuracy_{mode}"] = report.accuracy_table(seeds)
    if probes:
        tables["table_probes"] = report.probe_table(probes, TABLE_PROBES)
        tables["timestep_probes"] = report.probe_table(probes, TIMESTEP_PROBES)
    unswapped = {mode: [acc["NC"] for acc in seeds.values()] for mode, seeds in evals.items()}
    substitution = report.substitution_frame(swaps, unswapped)
    tables["substitution"] = substitution
    if pruned:
        tables["pruning"] = report.prune_table(pruned)

    contrast = []
    for seed in sorted(set(evals.get("ag", {})) & set(evals.get("baseline", {}))):
        ag = read_tensors(run_dir(out, "models", "ag", seed) / CHECKPOINT)[1]["decoder.embedding"]
        bl = read_tensors(run_dir(out, "models", "baseline", seed) / CHECKPOINT)[1]["decoder.embedding"]
        contrast.append({"seed": seed, **report.embedding_row_contrast(ag, bl)})
    if contrast:
        tables["embedding_rows"] = pd.DataFrame([{"seed": c["seed"], "ag_larger": c["count"]} for c in contrast])

    for name, df in tables.items():
        report.write_csv(df, report_dir / f"{name}.csv")

    criteria = {"generalization": report.generalization_criterion(evals)}
    if probes:
        criteria["table_probe"] = report.table_probe_criterion(probes)
        criteria["timestep_probe"] = report.timestep_criterion(probes)
        criteria["top_weight_overlap"] = report.overlap_criterion(probes, groups, top)
    if saturation:
        criteria["gate_saturation"] = report.saturation_criterion(saturation)
    if swaps:
        criteria["substitution"] = report.swap_criterion(substitution)
    if pruned:
        criteria["pruning"] = report.prune_criterion(pruned)
    if graphs:
        criteria["graph_threshold"] = report.graph_criterion(graphs)

    acceptance = report.acceptance_report(criteria)
    acceptance["embedding_rows"] = contrast
    acceptance["diverged_jobs"] = diverged
    acceptance["seeds"] = list(config.seeds)
    atomic_write_json(report_dir / "acceptance.json", acceptance)
    write_workbook(report_dir / "report.xlsx", tables)
    return acceptance
