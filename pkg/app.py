# app.py
"""
Command-line entry point.

    python app.py gen-data --seed 1 --out runs/data
    python app.py train --mode ag --seed 0 --data runs/data --out runs/ag0
    python app.py eval --checkpoint runs/ag0 --data runs/data --split all
    python app.py trace --checkpoint runs/ag0 --data runs/data --out runs/ag0/traces
    python app.py analyze --traces runs/ag0/traces --checkpoint runs/ag0 --what probe-table --out runs/ag0/analysis
    python app.py swap --host runs/ag0 --donor runs/bl0 --component DecoderWhh --data runs/data --out runs/swap
    python app.py prune --checkpoint runs/ag0 --data runs/data --out runs/prune
    python app.py reproduce --config experiment.json --out runs/full

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from numcore.errors import NumericalError, ValidationError
from ablate.components import ComponentKind
from ablate.prune import DEFAULT_KEEP_FRAC, RETRAIN_EPOCHS
from analysis.probes import ProbeConfig
from cli import commands, settings
from cli.config import MODE_CHOICES, load_config
from cli.reproduce import reproduce
from seq2seq.config import MODES

logger = logging.getLogger("app")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


# ---------------- PARSER ---------------- #

def _out(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--out", type=Path, required=required, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.py", description="Attention-guided seq2seq lookup-table lab")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ... (env LOOKUP_LAB_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate tables and splits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-atomic", action="store_true", help="leave atomic table examples out of train")
    _out(p)

    p = sub.add_parser("train", help="train one model")
    p.add_argument("--config", type=Path)
    p.add_argument("--mode", choices=MODES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data", type=Path)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--progress", action="store_true", default=None)
    _out(p)

    p = sub.add_parser("eval", help="sequence accuracy per split")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path)
    p.add_argument("--split", nargs="+", default=["all"], help="HI HC HT NC, long names or 'all'")
    _out(p, required=False)

    p = sub.add_parser("trace", help="capture activation traces")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path)
    p.add_argument("--split", nargs="+", default=["all"])
    _out(p)

    p = sub.add_parser("analyze", help="weights, activations and probes")
    p.add_argument("--traces", type=Path)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--data", type=Path, help="dataset for capturing traces when --traces is absent")
    p.add_argument("--what", nargs="+", choices=list(commands.ANALYZERS), required=True)
    p.add_argument("--matrix", nargs="+", default=(), help="tensor names for heatmap/graph")
    p.add_argument("--threshold", type=float)
    p.add_argument("--gate", choices=("update", "reset", "both"), default="both")
    p.add_argument("--array", nargs="+", default=(), help="trace arrays for saturation/dists")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--selection", choices=("retrain", "mask"), default="retrain")
    p.add_argument("--no-svg", action="store_true")
    _out(p)

    p = sub.add_parser("swap", help="implant a frozen donor component and retrain")
    p.add_argument("--host", type=Path, required=True)
    p.add_argument("--donor", type=Path, required=True)
    p.add_argument("--component", nargs="+", required=True, help=", ".join(k.value for k in ComponentKind))
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--data", type=Path)
    p.add_argument("--config", type=Path)
    _out(p)

    p = sub.add_parser("prune", help="keep the strongest units, then retrain")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--keep-frac", type=float, default=DEFAULT_KEEP_FRAC)
    p.add_argument("--retrain-epochs", type=int, default=RETRAIN_EPOCHS)
    p.add_argument("--force", action="store_true", help="allow keep-frac 0")
    p.add_argument("--data", type=Path)
    p.add_argument("--config", type=Path)
    _out(p)

    p = sub.add_parser("reproduce", help="full pipeline over all seeds and modes")
    p.add_argument("--config", type=Path)
    p.add_argument("--mode", choices=MODE_CHOICES)
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--epochs", type=int)
    p.add_argument("--workers", type=int)
    _out(p, required=False)
    return parser


# ---------------- COMMANDS ---------------- #

def run(args: argparse.Namespace) -> int:
    cmd = args.command

    if cmd == "gen-data":
        bundle = commands.gen_data(args.seed, args.out, include_atomic=not args.no_atomic)
        print(json.dumps(bundle.counts(), indent=2))

    elif cmd == "train":
        config = load_config(args.config, **{
            "training.epochs": args.epochs, "training.lr": args.lr,
            "training.progress": args.progress, "model.hidden_dim": args.hidden,
        })
        bundle = commands.load_bundle(args.data, config.data_seed, config.include_atomic)
        result = commands.train_model(config, args.mode, args.seed, bundle, args.out)
        print(json.dumps(result, indent=2))

    elif cmd == "eval":
        bundle = commands.load_bundle(args.data, checkpoint=args.checkpoint)
        print(json.dumps(commands.eval_checkpoint(args.checkpoint, bundle, args.split, args.out), indent=2))

    elif cmd == "trace":
        bundle = commands.load_bundle(args.data, checkpoint=args.checkpoint)
        traces = commands.trace_checkpoint(args.checkpoint, bundle, args.out, args.split)
        print(f"{len(traces)} traces written to {args.out}")

    elif cmd == "analyze":
        options = commands.AnalyzeOptions(
            matrices=args.matrix, threshold=args.threshold, gate=args.gate, arrays=args.array,
            k=args.k, seed=args.seed, svg=not args.no_svg,
            probe=ProbeConfig(seed=args.seed, selection=args.selection),
        )
        results = commands.analyze(args.what, args.out, traces=args.traces, checkpoint=args.checkpoint,
                                   data=args.data, options=options)
        print(json.dumps({w: sorted(r) for w, r in results.items()}, indent=2))

    elif cmd == "swap":
        config = load_config(args.config)
        bundle = commands.load_bundle(args.data, config.data_seed, config.include_atomic, checkpoint=args.host)
        kinds = [ComponentKind.parse(c) for c in args.component]
        results = commands.swap(args.host, args.donor, kinds, bundle, args.out, seeds=args.seeds,
                                epochs=args.epochs, lr=args.lr, config=config, n_jobs=config.n_jobs)
        print(json.dumps([{k: r[k] for k in ("component", "seed", "status", "accuracies")} for r in results], indent=2))

    elif cmd == "prune":
        config = load_config(args.config)
        bundle = commands.load_bundle(args.data, config.data_seed, config.include_atomic, checkpoint=args.checkpoint)
        result = commands.prune(args.checkpoint, bundle, args.out, args.keep_frac, args.retrain_epochs,
                                force=args.force, config=config)
        print(json.dumps({k: result[k] for k in ("before", "after_prune", "after_retrain", "mask_preserved")}, indent=2))

    elif cmd == "reproduce":
        config = load_config(args.config, **{
            "mode": args.mode, "seeds": args.seeds, "training.epochs": args.epochs,
            "n_jobs": args.workers, "out": str(args.out) if args.out else None,
        })
        out = Path(config.out)
        # --out is already mirrored by main(); a config-file or env location is not
        handler = settings.attach_run_log(out) if args.out is None else None
        try:
            acceptance = reproduce(config, out)
        finally:
            if handler is not None:
                settings.detach_run_log(handler)
        print(json.dumps({"passed": acceptance["passed"], "missed": acceptance["missed"]}, indent=2))

    return EXIT_OK


# ---------------- MAIN ---------------- #

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = None
    try:
        settings.configure_logging(args.log_level)
        out = getattr(args, "out", None)
        if out is not None:
            handler = settings.attach_run_log(out)
        return run(args)
    except (ValidationError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_VALIDATION
    except NumericalError as e:
        logger.error("numerical failure: %s", e)
        return EXIT_NUMERICAL
    finally:
        # detached last so error lines land in run.log
        if handler is not None:
            settings.detach_run_log(handler)


if __name__ == "__main__":
    sys.exit(main())
