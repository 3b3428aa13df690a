"""Run one subcommand and write its self-describing output directory.

An output directory holds ``config.json`` (the full parameter bag),
``<subcommand>.csv`` (the per-trial records) and ``summary.json``. Every file is
written atomically and none of them depends on the clock, so replaying a
config reproduces them byte for byte.
"""

import time
from pathlib import Path
from typing import Any, Dict

import structlog

from .. import __version__
from ..commands import COMMANDS
from ..exceptions import IoError, UsageError
from ..models.reports import ExperimentConfig, RunResult
from ..utils.files import atomic_write_text, render_csv, render_json
from .loader import load_spec

logger = structlog.get_logger(__name__)


def run(config: ExperimentConfig) -> RunResult:
    """
    Execute a subcommand

    Args:
        config: Parameter bag; ``config.out`` selects the output directory

    Returns:
        Records, summary and run metadata

    Raises:
        UsageError: for an unknown subcommand or a missing spec file
        IoError: if an output file cannot be written
    """
    entry = COMMANDS.get(config.subcommand)
    if entry is None:
        raise UsageError(
            f"unknown subcommand {config.subcommand!r}", hint=f"choose one of {', '.join(sorted(COMMANDS))}"
        )
    if entry.needs_spec and config.spec is None:
        raise UsageError(f"{config.subcommand} needs a spec file", hint="pass --spec PATH")

    log = logger.bind(subcommand=config.subcommand, seed=config.seed)
    bundle = load_spec(config.spec) if config.spec is not None else None
    log.info("run started", spec=config.spec)
    started = time.perf_counter()
    output = entry.handler(config, bundle)
    wall_clock = time.perf_counter() - started

    result = RunResult(
        config=config,
        header=output.header,
        records=output.records,
        summary=output.summary,
        wall_clock=wall_clock,
        seed=config.seed,
        version=__version__,
    )
    if config.out is not None:
        write_outputs(result, Path(config.out))
    log.info("run finished", records=len(result.records), wall_clock=round(wall_clock, 3))
    return result


def render_records(result: RunResult) -> str:
    return render_csv(result.header, ([record.get(column) for column in result.header] for record in result.records))


def summary_payload(result: RunResult) -> Dict[str, Any]:
    return {
        "subcommand": result.config.subcommand,
        "seed": result.seed,
        "version": result.version,
        "summary": result.summary,
    }


def write_outputs(result: RunResult, directory: Path) -> None:
    """Write config, records and summary into a fresh run directory"""
    if (directory / "config.json").exists():
        raise IoError(f"{directory} already holds a run; choose another output directory")
    atomic_write_text(directory / "config.json", render_json(result.config.model_dump(mode="json")))
    atomic_write_text(directory / f"{result.config.subcommand}.csv", render_records(result))
    atomic_write_text(directory / "summary.json", render_json(summary_payload(result)))
    logger.info("outputs written", directory=str(directory))
