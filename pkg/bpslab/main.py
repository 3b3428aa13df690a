"""Command-line entry point: ``python -m bpslab.main SUBCOMMAND [flags]``.

Results go to standard output (summary JSON, or the records as CSV with
``--format csv``); log events go to standard error. Exit codes: 0 success,
1 runtime or validation error, 2 usage error.
"""

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import pydantic
import structlog

from . import __version__
from .commands import COMMANDS
from .config import settings
from .exceptions import BpsLabError, ValidationError
from .models.reports import ExperimentConfig, RunResult
from .services.runner import render_records, run, summary_payload
from .utils.files import render_json
from .utils.logger import configure_logging

logger = structlog.get_logger(__name__)

# flag -> (type, help); defaults come from settings
KNOBS = {
    "beta": (float, "inverse temperature linking reward and ToM listener (default: the spec file's beta)"),
    "lr": (float, "learning rate of the variational optimizer"),
    "max_steps": (int, "upper bound on optimizer steps"),
    "tol": (float, "gradient max-norm that counts as converged"),
    "n_candidates": (int, "candidates per best-of-n answer"),
    "answering": (str, "how the diagnosed model answers: exact or best-of-n"),
    "pairs": (int, "synthetic preference pairs"),
    "trials": (int, "Monte-Carlo trials"),
    "epsilon": (float, "smallest capability gap that counts"),
    "reward_reg": (float, "L2 weight of the Bradley-Terry fit"),
    "smoothing": (float, "pseudo-count of the structured learner"),
    "feedback_lr": (float, "learning rate of the reward-only learner"),
    "prior_share": (float, "share of structured feedback spent on latent samples"),
}


def _common_flags() -> argparse.ArgumentParser:
    # SUPPRESS keeps values given before the subcommand from being reset by it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", metavar="PATH", default=argparse.SUPPRESS, help="spec file (JSON)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="fresh output directory")
    common.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS, help="standard output format")
    for name, (kind, text) in KNOBS.items():
        common.add_argument(f"--{name.replace('_', '-')}", type=kind, default=argparse.SUPPRESS, help=text)
    common.add_argument("--budgets", type=int, nargs="+", default=argparse.SUPPRESS, help="feedback budgets")
    common.add_argument("--seeds", type=int, nargs="+", default=argparse.SUPPRESS, help="seeds for compare")
    common.add_argument("--target", default=argparse.SUPPRESS, help="target intention symbol")
    common.add_argument("--context", default=argparse.SUPPRESS, help="context symbol")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="bpslab",
        description="Bounded pragmatic speakers over finite communication games",
        parents=[common],
    )
    parser.add_argument("--version", action="version", version=f"bpslab {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name in sorted(COMMANDS):
        subparsers.add_parser(name, parents=[common], help=COMMANDS[name].help)
    return parser


def make_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge parsed flags over settings into a validated config"""
    given: Dict[str, Any] = vars(args)
    values: Dict[str, Any] = {"subcommand": args.subcommand, "seed": given.get("seed", settings.seed)}
    for name in KNOBS:
        values[name] = given.get(name, getattr(settings, name))
    for name in ("spec", "format", "budgets", "seeds", "target", "context"):
        if name in given:
            values[name] = given[name]
    values["out"] = given.get("out") or _default_out(args.subcommand, values["seed"])
    try:
        return ExperimentConfig(**values)
    except pydantic.ValidationError as e:
        first = e.errors()[0]
        knob = ".".join(str(part) for part in first["loc"]) or "config"
        raise ValidationError(knob, first["msg"])


def _default_out(subcommand: str, seed: int) -> Optional[str]:
    if not settings.output_dir:
        return None
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    return str(Path(settings.output_dir) / f"{subcommand}-{stamp}-seed{seed}")


def emit(result: RunResult) -> None:
    if result.config.format == "csv":
        sys.stdout.write(render_records(result))
    else:
        sys.stdout.write(render_json(summary_payload(result)))
    if "verdict" in result.summary:
        sys.stdout.write(f"verdict: {result.summary['verdict']}\n")


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging(settings.log)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        result = run(make_config(args))
    except BpsLabError as e:
        logger.error("command failed", subcommand=args.subcommand, error=e.detail, exit_code=e.exit_code)
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception("unexpected failure", subcommand=args.subcommand, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return 1

    emit(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
