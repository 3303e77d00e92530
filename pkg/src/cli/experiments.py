"""
Experiment commands: gradient variance, learning-rate sweep, ablation grid,
stability study and synthetic data export.
"""
import json
import logging
from enum import Enum
from pathlib import Path
from typing import List, Optional

import typer
from rich.table import Table

from src.cli.common import CONFIG_OPTION, JOBS_OPTION, SEED_OPTION, console, handle_errors, load_config, write_text
from src.data import export_csv
from src.diagnostics import GradVarKind, StabilityProtocol, gradient_variance_from_config, stability_protocol
from src.errors import ConfigError
from src.experiments import ablate, build_dataset, sweep, write_rows

logger = logging.getLogger(__name__)


class GradVarChoice(str, Enum):
    ALL = "all"
    SINGLE = "single"
    VI = "vi"
    ABNN = "abnn"


def _parse_values(values: Optional[str]) -> Optional[List[float]]:
    if values is None:
        return None
    try:
        return [float(v) for v in values.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"--values must be comma-separated numbers: {str(e)}") from e


def _rows_table(title: str, rows: List[dict], leading: List[str]) -> Table:
    table = Table(title=title)
    columns = leading + ["acc", "ece", "auroc", "fpr95", "mi_ratio"]
    for column in columns:
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(*[row[column] or "-" for column in columns])
    return table


@handle_errors
def gradvar_command(
    config: Path = CONFIG_OPTION,
    kind: GradVarChoice = typer.Option(GradVarChoice.ALL, "--kind", help="Network kind to measure"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="JSON report file; stdout when omitted"),
    seed: Optional[int] = SEED_OPTION,
):
    """
    Measure gradient variance of the designated parameter groups.
    """
    run_config = load_config(config, seed)
    kinds = None if kind is GradVarChoice.ALL else [GradVarKind(kind.value)]
    reports = {k.value: report for k, report in gradient_variance_from_config(run_config, kinds).items()}
    payload = {name: report.model_dump(mode="json") for name, report in reports.items()}
    write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", out)

    table = Table(title="Gradient variance")
    table.add_column("kind")
    table.add_column("groups")
    table.add_column("variance", justify="right")
    table.add_column("post-hoc")
    for name, report in reports.items():
        table.add_row(name, "+".join(report.designated_groups), f"{report.variance:.3e}", "yes" if report.from_pretrained else "no")
    console.print(table)


@handle_errors
def sweep_command(
    config: Path = CONFIG_OPTION,
    param: str = typer.Option("finetune.lr", "--param", help="Dotted config path to vary"),
    values: Optional[str] = typer.Option(None, "--values", help="Comma-separated values (learning rates default to 0.1x..10x)"),
    relative: bool = typer.Option(False, "--relative", help="Treat values as multipliers of the configured value"),
    out: Path = typer.Option(..., "--out", "-o", help="CSV file to write"),
    seed: Optional[int] = SEED_OPTION,
    jobs: int = JOBS_OPTION,
):
    """
    Sensitivity sweep: one ABNN evaluation per value, written as CSV rows.
    """
    run_config = load_config(config, seed)
    rows = sweep(run_config, param, _parse_values(values), relative=relative, jobs=jobs)
    write_rows(rows, out, leading=["param", "value"])
    console.print(_rows_table(f"Sweep over {param}", rows, ["value"]))


@handle_errors
def ablate_command(
    config: Path = CONFIG_OPTION,
    out: Path = typer.Option(..., "--out", "-o", help="CSV file to write"),
    seed: Optional[int] = SEED_OPTION,
    jobs: int = JOBS_OPTION,
):
    """
    Random prior x multi-mode ablation grid (four rows).
    """
    run_config = load_config(config, seed)
    rows = ablate(run_config, jobs=jobs)
    write_rows(rows, out, leading=["RP", "MM"])
    console.print(_rows_table("Ablation", rows, ["RP", "MM"]))


@handle_errors
def stability_command(
    config: Path = CONFIG_OPTION,
    protocol: StabilityProtocol = typer.Option(..., "--protocol", help="Which runs vary between repetitions"),
    runs: int = typer.Option(5, "--runs", "-R", help="Number of repetitions (at least 3)"),
    seeds: Optional[str] = typer.Option(None, "--seeds", help="Comma-separated seed per run (default 0..R-1)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="JSON report file; stdout when omitted"),
    jobs: int = JOBS_OPTION,
):
    """
    Standard deviation of the metrics over repeated runs.
    """
    run_config = load_config(config, None)
    seed_list = [int(v) for v in _parse_values(seeds)] if seeds is not None else None
    report = stability_protocol(protocol, runs, run_config, seeds=seed_list, jobs=jobs)
    write_text(json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n", out)

    table = Table(title=f"Stability ({protocol.value}, R={runs})")
    table.add_column("metric")
    table.add_column("std", justify="right")
    for name, value in report.std.items():
        table.add_row(name, f"{value:.4f}")
    console.print(table)


@handle_errors
def export_data_command(
    config: Path = CONFIG_OPTION,
    out: Path = typer.Option(..., "--out", "-o", help="Directory receiving train.csv, test.csv and ood.csv"),
    seed: Optional[int] = SEED_OPTION,
):
    """
    Export the configured dataset (before standardization) as CSV.
    """
    run_config = load_config(config, seed)
    written = export_csv(build_dataset(run_config, standardize=False), out)
    console.print(f"Wrote {', '.join(path.name for path in written)} to {out}")
