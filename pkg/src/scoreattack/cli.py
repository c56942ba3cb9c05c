"""Command line entry point: ``scoreattack {ingest,attack,experiment,reproduce}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .attack import dump_predictions
from .corpus import save_corpus
from .harness import (ConfigError, ExperimentConfig, emit_report, read_corpus, run_experiment,
                      run_once, tomllib)
from .index import MemoryBudgetExceeded
from .reproduce import CAMPAIGNS, campaign
from .sse import save_querylog

logger = logging.getLogger("scoreattack")


def _parse_override(text: str) -> tuple[str, object]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"overrides take the form key=value (got {text!r})")
    key = key.strip()
    try:
        return key, tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        return key, value.strip()


def _with_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    updates = dict(_parse_override(o) for o in args.set or ())
    if updates:
        merged = {**vars(cfg), **updates}
        cfg = ExperimentConfig.from_mapping(merged)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    return cfg.validate()


def _cmd_ingest(args) -> int:
    corpus = read_corpus(args.source, args.kind)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / f"{args.kind}.corpus"
    save_corpus(corpus, target)
    print(f"{len(corpus)} documents -> {target}")
    return 0


def _cmd_attack(args) -> int:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    cfg = _with_overrides(cfg, args)
    result = run_once(cfg, cfg.base_seed, f"{cfg.name}-000", keep_predictions=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_predictions(result.predictions, result.log, out / "predictions.csv")
    save_querylog(result.log, out / "querylog.jsonl", redact=True)
    summary = {"seed": result.seed, "accuracy": result.accuracy, "epsilon": result.epsilon,
               "vocab_overlap": result.vocab_overlap, "query_overlap": result.query_overlap}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"accuracy={result.accuracy:.4f} epsilon={result.epsilon:.4f} -> {out}")
    return 0


def _run_campaign(configs, args, title: str) -> int:
    report = []
    for cfg in configs:
        logger.info("running %s (%d repetitions)", cfg.name, cfg.repetitions)
        results, stats = run_experiment(cfg, workers=args.workers)
        report.append((cfg, results, stats))
        print(f"{cfg.name}: mu={stats.mu:.4f} sigma={stats.sigma:.4f} runs={len(results)}")
    paths = emit_report(report, args.out, title=title, timing=not args.no_timing)
    print(f"report -> {paths['runs'].parent}")
    return 0


def _cmd_experiment(args) -> int:
    configs = [_with_overrides(ExperimentConfig.from_file(p), args) for p in args.configs]
    return _run_campaign(configs, args, "accuracy")


def _cmd_reproduce(args) -> int:
    configs = campaign(args.figure_id, published_repetitions=args.published_repetitions)
    configs = [_with_overrides(c, args) for c in configs]
    return _run_campaign(configs, args, args.figure_id.lower())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base seed (run i uses seed+i)")
    common.add_argument("--workers", type=int, default=1, help="parallel repetitions")
    common.add_argument("--out", default="scoreattack-out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    overrides = argparse.ArgumentParser(add_help=False)
    overrides.add_argument("--set", action="append", metavar="KEY=VALUE",
                           help="override one configuration key (repeatable)")
    overrides.add_argument("--no-timing", action="store_true",
                           help="leave runtime columns empty for byte-identical reruns")

    parser = argparse.ArgumentParser(prog="scoreattack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="raw archive -> corpus cache")
    p.add_argument("kind", choices=("enron", "apache"))
    p.add_argument("source", help="Enron maildir root or directory of mbox files")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("attack", parents=[common, overrides], help="single run with prediction dump")
    p.add_argument("config", nargs="?", help="experiment config file (TOML)")
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("experiment", parents=[common, overrides], help="config files -> report")
    p.add_argument("configs", nargs="+", help="one config file per experiment")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("reproduce", parents=[common, overrides], help="bundled figure campaigns")
    p.add_argument("figure_id", help=f"one of: {', '.join(CAMPAIGNS)}")
    p.add_argument("--published-repetitions", action="store_true",
                   help="50 repetitions per experiment instead of 20")
    p.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
    except (ConfigError, OSError, ValueError, MemoryBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
