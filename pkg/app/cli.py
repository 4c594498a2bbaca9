"""
Command-line interface of the simulator.

    run --config FILE [--seed N] [--threads K] [--out DIR]
    validate --config FILE
    list-experiments
    schema
"""
import argparse
import json
from typing import List, Optional

from core.config import get_settings
from core.exceptions import ConfigurationError, DataNotFoundError, NumericalError, StabilizationError
from core.logger import log_duration, setup_logger
from core.parsing import apply_overrides, parse_config
from core.schema import EXPERIMENTS, ExperimentConfig
from services.experiment_service import ExperimentService

logger = setup_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NUMERICAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qstab",
        description="Quantum register stabilization experiments",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Run the experiment named in a config file")
    run.add_argument("--config", required=True, help="Path to a JSON experiment config")
    run.add_argument("--seed", type=int, default=None, help="Master seed (overrides config)")
    run.add_argument("--threads", type=int, default=None, help="Worker threads (overrides config)")
    run.add_argument("--out", default=None, help="Output directory (overrides config)")

    validate = commands.add_parser("validate", help="Check a config file without running it")
    validate.add_argument("--config", required=True, help="Path to a JSON experiment config")

    commands.add_parser("list-experiments", help="Print the known experiment names")
    commands.add_parser("schema", help="Print the JSON schema of experiment configs")
    return parser


def _log_error(error: StabilizationError) -> None:
    logger.error(error.describe())


def cmd_run(args: argparse.Namespace) -> int:
    config = apply_overrides(parse_config(args.config), seed=args.seed, threads=args.threads, output_dir=args.out)
    with log_duration(logger, "Run"):
        paths = ExperimentService(config).run()
    for path in paths:
        print(path)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    print(f"{args.config}: OK ({config.experiment})")
    return EXIT_OK


def cmd_list(_args: argparse.Namespace) -> int:
    for name in EXPERIMENTS:
        print(name)
    return EXIT_OK


def cmd_schema(_args: argparse.Namespace) -> int:
    print(json.dumps(ExperimentConfig.model_json_schema(), indent=2))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "validate": cmd_validate,
    "list-experiments": cmd_list,
    "schema": cmd_schema,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch.

    Returns:
        Exit status: 0 on success, 2 on numerical failure, 1 on any other error
    """
    args = build_parser().parse_args(argv)
    try:
        get_settings()
        return COMMANDS[args.command](args)
    except (ConfigurationError, DataNotFoundError) as e:
        _log_error(e)
        return EXIT_FAILURE
    except NumericalError as e:
        _log_error(e)
        return EXIT_NUMERICAL
    except StabilizationError as e:
        _log_error(e)
        return EXIT_FAILURE
