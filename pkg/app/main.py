"""
Command line entry point

    python -m app.main prepare  --config exp.toml
    python -m app.main train    --config exp.toml
    python -m app.main attack   --config exp.toml [--checkpoint runs/x/model.ckpt]
    python -m app.main transfer --config exp.toml --checkpoint a.ckpt --checkpoint b.ckpt
    python -m app.main report   --out runs/
    python -m app.main sweep    --config exp.toml

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
"""
import argparse
import logging
import sys
from typing import List, Optional

from app.core.config import settings
from app.core.errors import ConfigError, ToolkitError
from app.core.logging import setup_logging
from app.schemas.experiment import ExperimentConfig, load_experiment_config
from app.services import pipeline

logger = logging.getLogger("app")

COMMANDS = ("prepare", "train", "attack", "transfer", "report", "sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specattack",
        description="Adversarial robustness benchmarks for audio spectrogram classifiers",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        if name != "report":
            sub.add_argument("--config", required=True, help="Experiment TOML file")
            sub.add_argument("--seed", type=int, default=None, help="Override the global seed")
        sub.add_argument("--out", default=None, help="Run directory (defaults to output_dir)")
        if name in ("prepare", "attack", "transfer", "sweep"):
            sub.add_argument("--workers", type=int, default=None, help="Worker pool size")
        if name in ("attack", "transfer"):
            sub.add_argument(
                "--checkpoint",
                action="append",
                default=None,
                help="Checkpoint file (repeat for transfer)",
            )
        sub.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL")
    return parser


def _config(args) -> ExperimentConfig:
    config = load_experiment_config(args.config)
    return config.with_overrides(seed=args.seed, output_dir=args.out)


def _workers(args) -> int:
    workers = getattr(args, "workers", None) or settings.DEFAULT_WORKERS
    if workers < 1:
        raise ConfigError(f"--workers must be at least 1, got {workers}")
    return workers


def dispatch(args) -> None:
    if args.command == "report":
        if not args.out:
            raise ConfigError("report needs --out pointing at a run directory")
        pipeline.cmd_report(args.out)
        return

    config = _config(args)
    if args.command == "prepare":
        summary = pipeline.cmd_prepare(config, workers=_workers(args))
        print(f"cache: {summary['cache_dir']} ({summary['computed']} computed, {summary['reused']} reused)")
    elif args.command == "train":
        pipeline.cmd_train(config)
    elif args.command == "attack":
        checkpoints = args.checkpoint or []
        if len(checkpoints) > 1:
            raise ConfigError("attack takes a single --checkpoint")
        pipeline.cmd_attack(config, checkpoints[0] if checkpoints else None, workers=_workers(args))
    elif args.command == "transfer":
        pipeline.cmd_transfer(config, args.checkpoint or [], workers=_workers(args))
    elif args.command == "sweep":
        pipeline.cmd_sweep(config, workers=_workers(args))


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors; usage errors map to 1 here
        return 0 if e.code == 0 else ConfigError.exit_code

    setup_logging(args.log_level)
    try:
        dispatch(args)
    except ToolkitError as e:
        logger.error(f"❌ {e.detail}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"❌ Internal error: {e}")
        return ToolkitError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
