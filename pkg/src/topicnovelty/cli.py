"""Command-line entry point: one subcommand per stage plus ``pipeline``.

Exit codes: 0 success, 2 configuration error, 3 missing prerequisite,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    AlignmentError,
    CollinearityError,
    ConfigError,
    InsufficientDataError,
    MissingPrerequisiteError,
    TopicNoveltyError,
)
from .pipeline import STAGES, make_config, parse_years, read_config_file, run_pipeline, run_stage

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PREREQ = 3
EXIT_NUMERIC = 4

_NUMERIC = (FloatingPointError, np.linalg.LinAlgError, AlignmentError, CollinearityError,
            InsufficientDataError)


def demo_config_path() -> Path:
    """Config file for the bundled synthetic corpus."""
    return Path(str(resources.files("topicnovelty") / "data" / "demo.conf"))


def _parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="key = value config file (flags override it)")
    shared.add_argument("--demo", action="store_true",
                        help="use the bundled synthetic corpus and its config")
    shared.add_argument("--out", type=Path, help="output directory")
    shared.add_argument("--seed", type=int, help="training seed")
    shared.add_argument("--workers", type=int, help="training threads; 1 is deterministic")
    shared.add_argument("--years", type=parse_years, help="inclusive year range A..B")
    shared.add_argument("--win", type=int, help="novelty window for the main models")
    shared.add_argument("--delta", type=int, help="growth lead for the main models")
    shared.add_argument("--documents", type=Path)
    shared.add_argument("--lexicon", type=Path)
    shared.add_argument("--descriptors", type=Path)
    shared.add_argument("--counts", type=Path)
    shared.add_argument("--dim", type=int)
    shared.add_argument("--epochs", type=int)
    shared.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key")
    shared.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="topicnovelty", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[shared], help=f"run the {stage} stage")
    pp = sub.add_parser("pipeline", parents=[shared], help="run every stage, skipping up-to-date ones")
    pp.add_argument("--force", action="store_true", help="re-run stages even when up to date")
    pp.add_argument("--stages", help="comma-separated subset of stages")
    return p


def build_config(args: argparse.Namespace):
    from .pipeline import coerce_value

    file_values = {}
    if args.demo:
        file_values.update(read_config_file(demo_config_path()))
    if args.config:
        file_values.update(read_config_file(args.config))
    overrides = {
        name: getattr(args, name)
        for name in ("out", "seed", "workers", "years", "win", "delta", "documents",
                     "lexicon", "descriptors", "counts", "dim", "epochs")
    }
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}", "set")
        key, raw = item.split("=", 1)
        overrides[key.strip()] = coerce_value(key.strip(), raw)
    try:
        cfg = make_config(file_values, overrides)
    except TypeError as exc:
        raise ConfigError(str(exc), "config") from exc
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "pipeline":
            stages = STAGES
            if args.stages:
                stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
                unknown = [s for s in stages if s not in STAGES]
                if unknown:
                    raise ConfigError(f"unknown stages {unknown}", "stages")
            cfg.validate()
            reports = run_pipeline(cfg, stages, force=args.force)
        else:
            reports = [run_stage(cfg, args.command)]
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingPrerequisiteError as exc:
        print(f"missing prerequisite: {exc.artifact}: {exc}", file=sys.stderr)
        return EXIT_PREREQ
    except _NUMERIC as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except TopicNoveltyError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for r in reports:
        status = "up to date" if r.skipped else f"{r.seconds:.2f}s"
        print(f"{r.stage:<10} {status:>10}  {len(r.outputs)} output(s)")
    summary = cfg.out / "report.json"
    from .storage import atomic_write_text
    atomic_write_text(summary, json.dumps([dict(r.to_dict(), skipped=r.skipped) for r in reports],
                                          indent=2, sort_keys=True) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
