"""
Shared plumbing for the abnn-lab commands: config loading, output and error reporting.
"""
import functools
import json
import logging
from pathlib import Path
from typing import Callable, Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from src.errors import AbnnError, ConfigError
from src.experiments import RunConfig, json_pointer, load_run_config
from src.metrics import CSV_FIELDS, MetricsReport

logger = logging.getLogger(__name__)

# Human summaries go to stderr; stdout carries machine-readable results only
console = Console(stderr=True)

CONFIG_OPTION = typer.Option(..., "--config", "-c", help="Path to the RunConfig JSON file")
SEED_OPTION = typer.Option(None, "--seed", help="Override every seed in the config")
JOBS_OPTION = typer.Option(1, "--jobs", "-j", min=1, help="Modes or members processed concurrently")


def load_config(path: Path, seed: Optional[int]) -> RunConfig:
    config = load_run_config(path)
    if seed is not None:
        config = config.with_seed(seed)
        logger.debug(f"Seeds overridden with {seed}")
    return config


def emit_error(payload: dict) -> None:
    typer.echo(json.dumps(payload, sort_keys=True), err=True)


def handle_errors(command: Callable) -> Callable:
    """Map library failures onto exit codes.

    Config problems exit with 2 and the JSON pointer of the offending value;
    any other library error exits with 1. Both print one JSON line on stderr.
    """
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConfigError as e:
            emit_error({"error": "config_invalid", "pointer": e.pointer, "message": str(e)})
            raise typer.Exit(code=2)
        except ValidationError as e:
            first = e.errors()[0]
            emit_error({"error": "config_invalid", "pointer": json_pointer(tuple(first["loc"])), "message": first["msg"]})
            raise typer.Exit(code=2)
        except AbnnError as e:
            emit_error({"error": type(e).__name__, "message": str(e)})
            raise typer.Exit(code=1)
        except (FileNotFoundError, IsADirectoryError) as e:
            emit_error({"error": type(e).__name__, "message": str(e)})
            raise typer.Exit(code=1)
    return wrapper


def write_text(text: str, out: Optional[Path]) -> None:
    """Write ``text`` to ``out``, or to stdout when no path is given."""
    if out is None:
        typer.echo(text, nl=False)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    logger.info(f"Wrote {out}")


def write_report(report: MetricsReport, out: Optional[Path]) -> None:
    """JSON report, or a single-row CSV when ``out`` ends in .csv."""
    if out is not None and out.suffix == ".csv":
        row = report.csv_row()
        text = ",".join(CSV_FIELDS) + "\n" + ",".join(row[name] for name in CSV_FIELDS) + "\n"
        write_text(text, out)
    else:
        write_text(report.to_json(), out)


def metrics_table(title: str, rows: dict) -> Table:
    """rich table with one column per report, one row per metric."""
    table = Table(title=title)
    table.add_column("metric")
    for name in rows:
        table.add_column(name, justify="right")
    for field in CSV_FIELDS:
        cells = []
        for report in rows.values():
            value = getattr(report, field)
            cells.append("-" if value is None else (f"{value:.4f}" if isinstance(value, float) else str(value)))
        table.add_row(field, *cells)
    return table
