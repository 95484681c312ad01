"""Command line: ``marlene run | stats | generate``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .brpw import ScalabilityError
from .experiment import ALGORITHMS, ConfigError, ExperimentConfig, fmt_summary, load_config, run_experiment
from .learners import HOEFFDING_TREE, NAIVE_BAYES
from .stream import ArffError, dataset_stats, load_dataset, write_csv
from .synth import SynthConfig, dump_manifest, synth_generate

_LEARNERS = {"ht": HOEFFDING_TREE, "nb": NAIVE_BAYES, HOEFFDING_TREE: HOEFFDING_TREE, NAIVE_BAYES: NAIVE_BAYES}


def _seeds(text: str) -> tuple[int, ...]:
    """``"0,1,5"`` or a range ``"0-29"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("no seeds given")
    return tuple(out)


def _add_synth_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--drift", metavar="CODE", help="two-letter drift code: SS, IS, II, IA, AA or AS")
    p.add_argument("--size", type=int, metavar="N", help="target examples per Gaussian (50, 500, 5000)")
    p.add_argument("--synth-source", action="append", default=None, choices=["similar", "nonsimilar"],
                   help="add a synthetic source stream (repeatable)")
    p.add_argument("--labels", type=int, metavar="L", help="number of synthetic labels (default 5)")
    p.add_argument("--source-size", type=int, metavar="N", help="source examples per Gaussian (default 5000)")


def _synth_from(args, base: SynthConfig | None) -> SynthConfig | None:
    given = {k: v for k, v in (("drift", args.drift), ("per_gaussian_size", args.size),
                               ("n_labels", args.labels),
                               ("source_per_gaussian_size", args.source_size)) if v is not None}
    if args.synth_source is not None:
        given["sources"] = tuple(args.synth_source)
    if base is None and not given:
        return None
    return dataclasses.replace(base or SynthConfig(), **given)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="marlene", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="prequential experiment")
    run.add_argument("--config", metavar="FILE", help="JSON experiment config; flags override it")
    run.add_argument("--data", metavar="PATH", help="target dataset (.arff or .csv)")
    run.add_argument("--source", action="append", default=None, metavar="PATH",
                     help="source dataset file (repeatable)")
    _add_synth_args(run)
    run.add_argument("--algorithm", choices=ALGORITHMS)
    run.add_argument("--learner", choices=sorted(_LEARNERS))
    run.add_argument("--seeds", type=_seeds, help="e.g. 0,1,2 or 0-29")
    run.add_argument("--window-fraction", type=float)
    run.add_argument("--combine", choices=["normalized", "raw-sum"])
    run.add_argument("--policy", choices=["round-robin", "random", "proportional"])
    run.add_argument("--schedule", metavar="FILE", help="stream order file (one S<k>/T tag per line)")
    run.add_argument("--max-target", type=int, metavar="N", help="use only the first N target examples")
    run.add_argument("--max-members", type=int, metavar="N", help="cap members per lineage")
    run.add_argument("--per-label", action="store_true", default=None,
                     help="add per-label windowed G-Mean columns to metrics.csv")
    run.add_argument("--force", action="store_true", default=None,
                     help="allow BRPW on targets with more than 32 labels")
    run.add_argument("--out", metavar="DIR", help="output directory")
    run.add_argument("--show-config", action="store_true",
                     help="print the effective configuration and exit")

    stats = sub.add_parser("stats", help="dataset size and label statistics")
    stats.add_argument("path")

    gen = sub.add_parser("generate", help="write synthetic streams as CSV")
    _add_synth_args(gen)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", metavar="DIR", required=True)
    return parser


def _experiment_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    synth = _synth_from(args, cfg.synth)
    updates = {
        "data": args.data,
        "sources": None if args.source is None else tuple(args.source),
        "algorithm": args.algorithm,
        "seeds": args.seeds,
        "window_fraction": args.window_fraction,
        "combine": args.combine,
        "policy": args.policy,
        "schedule": args.schedule,
        "max_target": args.max_target,
        "max_members_per_lineage": args.max_members,
        "per_label": args.per_label,
        "force": args.force,
        "output_dir": args.out,
    }
    cfg = dataclasses.replace(cfg, **{k: v for k, v in updates.items() if v is not None})
    if synth is not None:
        cfg = dataclasses.replace(cfg, synth=synth)
    if args.learner:
        cfg = dataclasses.replace(cfg, learner=dataclasses.replace(cfg.learner, kind=_LEARNERS[args.learner]))
    return cfg


def cmd_run(args) -> int:
    cfg = _experiment_config(args)
    if args.show_config:
        print(json.dumps(cfg.to_dict(), indent=2))
        return 0
    result = run_experiment(cfg)
    print(f"{cfg.algorithm} on {result.meta.name}: {fmt_summary(result)}")
    if cfg.output_dir:
        print(f"wrote {cfg.output_dir}")
    return 0


def cmd_stats(args) -> int:
    meta, data = load_dataset(args.path)
    s = dataset_stats(data)
    print("name\t|D|\t|x|\t|L|\tLDen\tLIR\tLSIR")
    print(f"{meta.name}\t{len(data)}\t{meta.n_features}\t{meta.n_labels}\t"
          f"{s.lden:.3f}\t{s.lir:.3f}\t{s.lsir:.3f}")
    return 0


def cmd_generate(args) -> int:
    synth = _synth_from(args, None) or SynthConfig()
    synth = dataclasses.replace(synth, seed=args.seed)
    data = synth_generate(synth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "target.csv", data.meta, data.target)
    for k, src in enumerate(data.sources, start=1):
        write_csv(out / f"source_{k}.csv", dataclasses.replace(data.meta, name=f"source_{k}"), src)
    (out / "drifts.csv").write_text(dump_manifest(data.drifts), encoding="utf-8")
    print(f"wrote {len(data.target)} target and {sum(map(len, data.sources))} source examples to {out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"run": cmd_run, "stats": cmd_stats, "generate": cmd_generate}[args.command]
    try:
        return handler(args)
    except (ConfigError, ScalabilityError) as exc:
        print(f"marlene {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ArffError, ValueError, OSError) as exc:
        print(f"marlene {args.command}: error: {exc}", file=sys.stderr)
        return 1


__all__ = ["build_parser", "main"]
