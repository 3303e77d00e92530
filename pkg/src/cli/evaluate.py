"""
Evaluation commands: metrics reports and logit export.
"""
import logging
from enum import Enum
from pathlib import Path
from typing import Optional

import typer

from src.cli.common import CONFIG_OPTION, JOBS_OPTION, SEED_OPTION, console, handle_errors, load_config, metrics_table, write_report
from src.ensemble import export_logits_csv, predict
from src.errors import ConfigError, DatasetError
from src.experiments import build_dataset, evaluate_modeset, evaluate_single, inference_config, run_deep_ensemble, run_pretrain
from src.model import load_checkpoint
from src.train import load_modeset

logger = logging.getLogger(__name__)


class Baseline(str, Enum):
    SINGLE = "single"
    DEEP_ENSEMBLE = "deep-ensemble"


class Split(str, Enum):
    ID = "id"
    OOD = "ood"


@handle_errors
def eval_command(
    config: Path = CONFIG_OPTION,
    modeset: Optional[Path] = typer.Option(None, "--modeset", "-m", help="Mode-set directory written by finetune"),
    baseline: Optional[Baseline] = typer.Option(None, "--baseline", help="Evaluate a baseline instead of a mode set"),
    ckpt: Optional[Path] = typer.Option(None, "--ckpt", help="Checkpoint for --baseline single (pretrained from the config when omitted)"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Report file (.json or .csv); stdout when omitted"),
    seed: Optional[int] = SEED_OPTION,
    jobs: int = JOBS_OPTION,
):
    """
    Evaluate a fine-tuned mode set, or the single-model or deep-ensemble baseline.
    """
    if (modeset is None) == (baseline is None):
        raise ConfigError("Pass exactly one of --modeset and --baseline")
    run_config = load_config(config, seed)
    dataset = build_dataset(run_config)

    if modeset is not None:
        label = "abnn"
        report = evaluate_modeset(run_config, load_modeset(modeset), dataset, jobs=jobs)
    elif baseline is Baseline.SINGLE:
        label = "single"
        checkpoint = load_checkpoint(ckpt) if ckpt is not None else run_pretrain(run_config, dataset)
        report = evaluate_single(run_config, checkpoint, dataset)
    else:
        label = "deep-ensemble"
        report = evaluate_modeset(run_config, run_deep_ensemble(run_config, dataset, jobs=jobs), dataset, jobs=jobs)

    write_report(report, out)
    console.print(metrics_table(f"{dataset.name} evaluation", {label: report}))


@handle_errors
def export_logits_command(
    config: Path = CONFIG_OPTION,
    modeset: Path = typer.Option(..., "--modeset", "-m", help="Mode-set directory written by finetune"),
    split: Split = typer.Option(Split.ID, "--split", help="Export the ID test split or the OOD set"),
    out: Path = typer.Option(..., "--out", "-o", help="CSV file to write"),
    seed: Optional[int] = SEED_OPTION,
    jobs: int = JOBS_OPTION,
):
    """
    Write every member's logits on a split as CSV (sample_id, member_id, logit_c).
    """
    run_config = load_config(config, seed)
    dataset = build_dataset(run_config)
    modes = load_modeset(modeset)
    if split is Split.OOD and dataset.ood is None:
        raise DatasetError(f"Dataset {dataset.name} has no OOD set")
    x = dataset.test.x if split is Split.ID else dataset.ood
    bundle = predict(modes, x, inference_config(run_config, modes), jobs=jobs)
    export_logits_csv(bundle, out)
    console.print(f"Exported {bundle.n_members} members x {bundle.batch} samples -> {out}")
