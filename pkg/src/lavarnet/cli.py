"""Command-line entry point: ``lavarnet {generate,train,evaluate,interpret,bench}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, load_config
from .dataio import DataError
from .datagen import GenerationError
from .tensor import ContractError
from .training import TrainingAborted

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment config")
    common.add_argument("--preset", choices=["desk", "full"], help="built-in experiment grid")
    common.add_argument("--out", type=Path, help="output directory (overrides config 'out')")
    common.add_argument("--seed", type=int, help="base seed (overrides config 'seed')")
    common.add_argument("--jobs", type=int, default=1, help="parallel training workers")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="lavarnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write synthetic series and ground truth")
    train = sub.add_parser("train", parents=[common], help="train every variant/repetition/grid candidate")
    train.add_argument("--audit", action="store_true",
                       help="blank out test rows before training; any access aborts the run")
    sub.add_parser("evaluate", parents=[common], help="test-split MAE reports and summary")
    interp = sub.add_parser("interpret", parents=[common], help="R_L / R_V recovery scores")
    interp.add_argument("--no-dump", action="store_true", help="skip the A-matrix CSV dumps")
    sub.add_parser("bench", parents=[common], help="training wall-clock timing per model")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg = load_config(args.config, args.preset, seed=args.seed,
                          out=str(args.out) if args.out else None)
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "generate":
            paths = pipeline.cmd_generate(cfg, out)
            print(f"wrote {len(paths)} files under {out / 'data'}")
        elif args.command == "train":
            results = pipeline.cmd_train(cfg, out, args.jobs, args.audit)
            print(f"trained {len(results)} models under {out / 'runs'}")
        elif args.command == "evaluate":
            print(pipeline.cmd_evaluate(cfg, out))
        elif args.command == "interpret":
            print(pipeline.cmd_interpret(cfg, out, dump_A=not args.no_dump))
        elif args.command == "bench":
            print(pipeline.cmd_bench(cfg, out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, GenerationError, ContractError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingAborted as exc:
        print(f"training aborted: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
