"""
tsd-lab command line.

Verbs:
    train-teacher  --config <path> [--out <dir>] [--seed <int>] [--jobs <int>]
    distill        --config <path> [--out <dir>] [--seed <int>] [--jobs <int>]
    ablate         --config <path> --axis <axis> [--out <dir>] [--seed <int>] [--jobs <int>]
    report         [<run_dir>] [--out <dir>]

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

Usage:
    poetry run tsd-lab train-teacher --config experiment.json --out runs/cbf
"""

import argparse
import asyncio
import contextlib
import json
import sys
from collections.abc import Iterator, Sequence
from pathlib import Path
from typing import Any

from loguru import logger
from pydantic import ValidationError

from tsd_lab.config import LabSettings, get_lab_settings
from tsd_lab.container import build_lab_container
from tsd_lab.domain.enums import AblationAxis
from tsd_lab.domain.errors import ConfigError
from tsd_lab.domain.experiment_schemas import ExperimentConfig
from tsd_lab.services import ExperimentService, ReportService, RunLayout

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILURE = 2


class UsageError(Exception):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tsd-lab", description="Temporal saliency distillation experiments")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_run_flags(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", required=True, help="Experiment config (JSON)")
        sub.add_argument("--out", default=None, help="Run directory (overrides the config)")
        sub.add_argument("--seed", type=int, default=None, help="Global seed (overrides the config)")
        sub.add_argument("--jobs", type=int, default=None, help="Parallel independent runs (overrides the config)")

    add_run_flags(commands.add_parser("train-teacher", help="Train teacher candidates and keep the best"))
    add_run_flags(commands.add_parser("distill", help="Train students against the registered teacher"))
    ablate = commands.add_parser("ablate", help="Sweep one factor with the registered teacher")
    add_run_flags(ablate)
    ablate.add_argument("--axis", required=True, choices=[a.value for a in AblationAxis])
    report = commands.add_parser("report", help="Render the summary of a run directory")
    report.add_argument("run_dir", nargs="?", default=None)
    report.add_argument("--out", default=None, help="Run directory (when run_dir is not given)")
    return parser


def load_config(args: argparse.Namespace, settings: LabSettings) -> ExperimentConfig:
    """
    Read the config file and apply flag overrides.

    Precedence: flag > config file > settings.

    Raises:
        ConfigError: Missing file, invalid JSON or invalid flag value
        ValidationError: Schema violations
    """
    path = Path(args.config)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        payload: dict[str, Any] = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")

    if args.jobs is not None and args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    payload["output_dir"] = args.out or payload.get("output_dir") or settings.output_dir
    payload["jobs"] = args.jobs if args.jobs is not None else payload.get("jobs", settings.jobs)
    if args.seed is not None:
        payload["seed"] = args.seed
    return ExperimentConfig.model_validate(payload)


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level.upper())


@contextlib.contextmanager
def run_log(run_dir: Path) -> Iterator[None]:
    """Mirror every log line of the command into <run_dir>/run.log."""
    layout = RunLayout(run_dir)
    layout.root.mkdir(parents=True, exist_ok=True)
    sink_id = logger.add(layout.log, level="DEBUG", mode="a", encoding="utf-8")
    try:
        yield
    finally:
        logger.remove(sink_id)


async def run_command(args: argparse.Namespace, settings: LabSettings) -> int:
    container = build_lab_container()
    async with container.context() as ctx:
        if args.command == "report":
            run_dir = args.run_dir or args.out or settings.output_dir
            reports = await ctx.resolve(ReportService)
            print(await reports.render(run_dir), end="")
            return EXIT_OK

        config = load_config(args, settings)
        experiments = await ctx.resolve(ExperimentService)
        # Datasets and teachers are checked before anything is written.
        data = await experiments.load_data(config)
        out = Path(config.output_dir)
        experiments.check_inputs(args.command, config, out, data, getattr(args, "axis", None))
        with run_log(out):
            logger.info(f"🚀 {args.command} -> {out} (seed {config.seed}, jobs {config.jobs})")
            if args.command == "train-teacher":
                await experiments.train_teacher(config, out, data)
            elif args.command == "distill":
                await experiments.distill(config, out, data)
            else:
                await experiments.ablate(config, out, data, args.axis)
            logger.info(f"✅ {args.command} finished")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_lab_settings()
    configure_logging(settings.log_level)
    try:
        args = build_parser().parse_args(argv)
        return asyncio.run(run_command(args, settings))
    except (UsageError, ConfigError, ValidationError) as exc:
        logger.error(str(exc))
        return EXIT_USAGE
    except Exception as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        logger.opt(exception=exc).debug("Traceback")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
