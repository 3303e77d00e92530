"""
Training commands: pretrain a deterministic network and fine-tune it into an ABNN.
"""
import logging
from pathlib import Path
from typing import Optional

import typer

from src.cli.common import CONFIG_OPTION, JOBS_OPTION, SEED_OPTION, console, handle_errors, load_config
from src.experiments import build_dataset, run_finetune, run_pretrain
from src.model import load_checkpoint, save_checkpoint
from src.train import save_modeset

logger = logging.getLogger(__name__)


@handle_errors
def pretrain_command(
    config: Path = CONFIG_OPTION,
    out: Path = typer.Option(..., "--out", "-o", help="Checkpoint file to write"),
    seed: Optional[int] = SEED_OPTION,
):
    """
    Pretrain the deterministic network described by the config.
    """
    run_config = load_config(config, seed)
    ckpt = run_pretrain(run_config)
    save_checkpoint(ckpt, out)
    final = ckpt.metadata.loss_curve[-1] if ckpt.metadata.loss_curve else float("nan")
    console.print(f"Pretrained {len(ckpt.network.spec.hidden)} hidden blocks for {ckpt.metadata.epochs} epochs, final loss {final:.4f} -> {out}")


@handle_errors
def finetune_command(
    config: Path = CONFIG_OPTION,
    ckpt: Path = typer.Option(..., "--ckpt", help="Pretrained checkpoint"),
    out: Path = typer.Option(..., "--out", "-o", help="Directory receiving the mode set"),
    seed: Optional[int] = SEED_OPTION,
    jobs: int = JOBS_OPTION,
):
    """
    Convert a pretrained checkpoint into an ABNN and fine-tune M modes.
    """
    run_config = load_config(config, seed)
    dataset = build_dataset(run_config)
    modes = run_finetune(run_config, load_checkpoint(ckpt), dataset, jobs=jobs)
    save_modeset(modes, out)
    console.print(f"Fine-tuned {modes.M} modes -> {out}")
