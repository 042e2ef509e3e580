# cli/report.py
"""
Result tables and the acceptance report.

Inputs are plain dicts as written by the individual commands, so every
table can be rebuilt from a run directory without re-running anything.
"""
import logging
from pathlib import Path
from statistics import median
from typing import Dict, Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from numcore.fileio import atomic_write_text
from ablate.components import ComponentKind

logger = logging.getLogger(__name__)

SPLIT_COLUMNS = ["HC", "HI", "HT", "NC"]
MODE_LABELS = {"ag": "AG", "baseline": "Baseline"}

# Baseline hosts only receive whole halves from the AG donor
HOST_COMPONENTS = {
    "ag": [k.value for k in ComponentKind],
    "baseline": [ComponentKind.ENCODER.value, ComponentKind.DECODER.value],
}


def mean_sd(values: Sequence[float]):
    values = [float(v) for v in values]
    if not values:
        return float("nan"), float("nan")
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), sd


def format_mean_sd(values: Sequence[float]) -> str:
    m, s = mean_sd(values)
    return "n/a" if np.isnan(m) else f"{m:.2f} ± {s:.2f}"


def write_csv(df: pd.DataFrame, path: Path) -> Path:
    return atomic_write_text(Path(path), df.to_csv(index=False, float_format="%.6f", lineterminator="\n"))


# ============================================================
# Tables
# ============================================================
def accuracy_table(evals: Mapping[int, Mapping[str, float]]) -> pd.DataFrame:
    """One row per run: sequence accuracy on every test split."""
    rows = [{"Run": i + 1, "seed": seed, **{c: evals[seed][c] for c in SPLIT_COLUMNS}}
            for i, seed in enumerate(sorted(evals))]
    return pd.DataFrame(rows, columns=["Run", "seed"] + SPLIT_COLUMNS)


def substitution_frame(swaps: Iterable[Mapping], unswapped: Mapping[str, Sequence[float]]) -> pd.DataFrame:
    """
    New-composition accuracy per (host, component), mean ± sd over seeds.

    The "–" row of each host is the unswapped model.
    """
    swaps = list(swaps)
    rows = []
    for mode, components in HOST_COMPONENTS.items():
        if mode not in unswapped and not any(s["host_mode"] == mode for s in swaps):
            continue
        nc = list(unswapped.get(mode, []))
        m, s = mean_sd(nc)
        rows.append({"Host": MODE_LABELS[mode], "Component": "–", "NC": format_mean_sd(nc),
                     "nc_mean": m, "nc_sd": s, "n": len(nc), "diverged": 0})
        for kind in components:
            cell = [r for r in swaps if r["host_mode"] == mode and r["component"] == kind]
            if not cell:
                continue
            ok = [r["accuracies"]["NC"] for r in cell if r["status"] == "ok"]
            m, s = mean_sd(ok)
            rows.append({"Host": MODE_LABELS[mode], "Component": kind, "NC": format_mean_sd(ok),
                         "nc_mean": m, "nc_sd": s, "n": len(ok),
                         "diverged": sum(1 for r in cell if r["status"] != "ok")})
    return pd.DataFrame(rows, columns=["Host", "Component", "NC", "nc_mean", "nc_sd", "n", "diverged"])


def probe_table(probes: Mapping[str, Mapping[int, Mapping[str, Mapping]]], names: Sequence[str]) -> pd.DataFrame:
    """Accuracy and functional-group size per (mode, probe), averaged over seeds."""
    rows = []
    for mode in probes:
        for name in names:
            reports = [p[name] for p in probes[mode].values() if name in p]
            if not reports:
                continue
            overlaps = [r["overlap"] for r in reports if r.get("overlap") is not None]
            rows.append({
                "Model": MODE_LABELS.get(mode, mode),
                "Probe": name,
                "Accuracy": float(np.mean([r["group_accuracy"] for r in reports])),
                "Accuracy (all units)": float(np.mean([r["full_accuracy"] for r in reports])),
                "#Units": float(np.mean([r["group_size"] for r in reports])),
                "Overlap": float(np.mean(overlaps)) if overlaps else float("nan"),
                "Majority": float(np.mean([r["majority_baseline"] for r in reports])),
            })
    return pd.DataFrame(rows)


def prune_table(results: Iterable[Mapping]) -> pd.DataFrame:
    rows = [{
        "Model": MODE_LABELS.get(r["mode"], r["mode"]),
        "seed": r.get("seed"),
        "NC before": r["before"].get("NC"),
        "NC pruned": r["after_prune"].get("NC"),
        "NC retrained": r["after_retrain"].get("NC"),
        "mask preserved": r.get("mask_preserved"),
        "status": r.get("status", "ok"),
    } for r in results]
    return pd.DataFrame(rows)


def embedding_row_contrast(ag: np.ndarray, baseline: np.ndarray, rows: Sequence[int] = range(1, 10)) -> Dict:
    """Decoder embedding rows (SOS and the binary strings) where AG has the larger mean |w|."""
    ag_rows = np.abs(ag).mean(axis=1)
    bl_rows = np.abs(baseline).mean(axis=1)
    larger = [int(r) for r in rows if ag_rows[r] > bl_rows[r]]
    return {"rows": [int(r) for r in rows], "ag_larger": larger, "count": len(larger)}


# ============================================================
# Acceptance
# ============================================================
def _criterion(passed: bool, values: Dict, thresholds: Dict) -> Dict:
    return {"passed": bool(passed), "flagged": not passed, "values": values, "thresholds": thresholds}


def _per_seed(evals: Mapping[int, Mapping[str, float]], split: str) -> Dict[str, float]:
    return {str(seed): float(v[split]) for seed, v in sorted(evals.items())}


def _med(values: Iterable[float]) -> float:
    values = list(values)
    return float(median(values)) if values else float("nan")


def generalization_criterion(evals: Mapping[str, Mapping[int, Mapping[str, float]]]) -> Dict:
    ag_min = {"HC": 0.98, "HI": 0.98, "HT": 0.85, "NC": 0.65}
    bl_max = {"HC": 0.35, "HI": 0.35, "HT": 0.10, "NC": 0.10}
    values, ok = {}, True
    for split in SPLIT_COLUMNS:
        if "ag" in evals:
            v = _per_seed(evals["ag"], split)
            values[f"ag.{split}"] = v
            ok &= _med(v.values()) >= ag_min[split]
        if "baseline" in evals:
            v = _per_seed(evals["baseline"], split)
            values[f"baseline.{split}"] = v
            ok &= _med(v.values()) <= bl_max[split]
    return _criterion(ok, values, {"ag_min": ag_min, "baseline_max": bl_max})


def _probe_values(probes, mode, name, key):
    return {str(seed): p[name][key] for seed, p in sorted(probes.get(mode, {}).items()) if name in p}


def table_probe_criterion(probes) -> Dict:
    enc, gate = "table[enc_h]", "table[dec_z]"
    v = {
        "ag.enc_h.accuracy": _probe_values(probes, "ag", enc, "full_accuracy"),
        "ag.enc_h.group_size": _probe_values(probes, "ag", enc, "group_size"),
        "baseline.enc_h.group_size": _probe_values(probes, "baseline", enc, "group_size"),
        "ag.dec_z.accuracy": _probe_values(probes, "ag", gate, "full_accuracy"),
        "baseline.dec_z.accuracy": _probe_values(probes, "baseline", gate, "full_accuracy"),
    }
    ok = (_med(v["ag.enc_h.accuracy"].values()) >= 0.98
          and _med(v["ag.enc_h.group_size"].values()) <= 5
          and _med(v["baseline.enc_h.group_size"].values()) >= 20
          and _med(v["ag.dec_z.accuracy"].values()) >= 0.90
          and _med(v["baseline.dec_z.accuracy"].values()) <= 0.60)
    return _criterion(ok, v, {"ag_enc_accuracy": 0.98, "ag_group_max": 5, "baseline_group_min": 20,
                              "ag_gate_accuracy": 0.90, "baseline_gate_max": 0.60, "majority": 0.125})


def timestep_criterion(probes) -> Dict:
    name = "timestep[enc_h]"
    v = {
        "ag.accuracy": _probe_values(probes, "ag", name, "full_accuracy"),
        "ag.group_size": _probe_values(probes, "ag", name, "group_size"),
        "baseline.group_size": _probe_values(probes, "baseline", name, "group_size"),
    }
    ok = (_med(v["ag.accuracy"].values()) >= 1.0 - 1e-9
          and _med(v["ag.group_size"].values()) <= 5
          and _med(v["baseline.group_size"].values()) >= 20)
    return _criterion(ok, v, {"ag_accuracy": 1.0, "ag_group_max": 5, "baseline_group_min": 20})


def overlap_criterion(probes, groups: Mapping[int, Sequence[int]], top: Mapping[int, Sequence[int]]) -> Dict:
    """
    Averaged per-run overlap (the judged value) and the pooled overlap over all
    runs' groups.
    """
    per_run = _probe_values(probes, "ag", "table[enc_h]", "overlap")
    hits = sum(sum(1 for u in groups[s] if u in set(top[s])) for s in groups)
    total = sum(len(groups[s]) for s in groups)
    pooled = hits / total if total else float("nan")
    averaged = float(np.mean(list(per_run.values()))) if per_run else float("nan")
    return _criterion(averaged >= 0.8, {"per_run": per_run, "averaged": averaged, "pooled": pooled},
                      {"min_overlap": 0.8})


def saturation_criterion(shares: Mapping[str, Mapping[int, float]]) -> Dict:
    ag = {str(k): v for k, v in sorted(shares.get("ag", {}).items())}
    bl = {str(k): v for k, v in sorted(shares.get("baseline", {}).items())}
    ag_m = float(np.mean(list(ag.values()))) if ag else float("nan")
    bl_m = float(np.mean(list(bl.values()))) if bl else float("nan")
    ok = ag_m > 0 and ag_m >= 2 * bl_m
    return _criterion(ok, {"ag": ag, "baseline": bl, "ag_mean": ag_m, "baseline_mean": bl_m},
                      {"factor": 2.0, "min_fraction": 0.5})


def swap_criterion(substitution: pd.DataFrame) -> Dict:
    def nc(host, comp):
        row = substitution[(substitution["Host"] == host) & (substitution["Component"] == comp)]
        return float(row["nc_mean"].iloc[0]) if len(row) else float("nan")

    v = {
        "AG+Decoder": nc("AG", "Decoder"),
        "AG+Encoder": nc("AG", "Encoder"),
        "AG+DecoderWhh": nc("AG", "DecoderWhh"),
        "AG+DecoderWih": nc("AG", "DecoderWih"),
        "AG+EncoderWih": nc("AG", "EncoderWih"),
        "AG": nc("AG", "–"),
        "baseline_max": float(substitution.loc[substitution["Host"] == "Baseline", "nc_mean"].max()),
    }
    ok = (v["AG+Decoder"] <= 0.3 and v["AG+Encoder"] <= 0.35 and v["AG+DecoderWhh"] >= 0.8
          and v["AG+EncoderWih"] >= v["AG"] and v["baseline_max"] <= 0.10)
    v["ordering_decoder<wih<whh"] = bool(v["AG+Decoder"] < v["AG+DecoderWih"] < v["AG+DecoderWhh"])
    return _criterion(ok, v, {"decoder_max": 0.3, "encoder_max": 0.35, "decoder_whh_min": 0.8,
                              "baseline_max": 0.10})


def prune_criterion(results: Sequence[Mapping]) -> Dict:
    ag = [r for r in results if r["mode"] == "ag" and r.get("status", "ok") == "ok"]
    pruned = {str(r.get("seed")): r["after_prune"]["NC"] for r in ag}
    retrained = {str(r.get("seed")): r["after_retrain"]["NC"] for r in ag}
    preserved = all(r.get("mask_preserved") for r in results if r.get("status", "ok") == "ok")
    ok = bool(ag) and np.mean(list(pruned.values())) < 0.35 and np.mean(list(retrained.values())) >= 0.8 and preserved
    return _criterion(ok, {"pruned": pruned, "retrained": retrained, "mask_preserved": preserved},
                      {"pruned_max": 0.35, "retrained_min": 0.8})


def graph_criterion(fractions: Mapping[str, Mapping[int, Mapping[str, float]]]) -> Dict:
    """Kept-edge fraction at the calibrated thresholds, averaged over modes."""
    per_mode = {}
    for mode, seeds in fractions.items():
        per_mode[mode] = float(np.mean([np.mean(list(halves.values())) for halves in seeds.values()]))
    avg = float(np.mean(list(per_mode.values()))) if per_mode else float("nan")
    return _criterion(abs(avg - 0.01) <= 0.005, {"per_mode": per_mode, "averaged": avg},
                      {"target": 0.01, "tolerance": 0.005})


def acceptance_report(criteria: Mapping[str, Dict]) -> Dict:
    missed = [k for k, c in criteria.items() if not c["passed"]]
    if missed:
        logger.warning("acceptance criteria missed on these seeds: %s", ", ".join(missed))
    return {"criteria": dict(criteria), "passed": not missed, "missed": missed}
