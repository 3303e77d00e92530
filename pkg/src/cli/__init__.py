"""
CLI module for abnn-lab.
This module assembles the typer app from the command modules.
"""
import logging
import os

import typer

from src.cli import evaluate, experiments, train
from src.config import LogLevel, settings
from src.utils.logging import configure_logging
from src.version import SERVICE_DESCRIPTION, __version__

logger = logging.getLogger(__name__)

# Create the main CLI app with global options
app = typer.Typer(
    context_settings={"help_option_names": ["-h", "--help"]},
    help=SERVICE_DESCRIPTION,
    no_args_is_help=True,
)

app.command("pretrain")(train.pretrain_command)
app.command("finetune")(train.finetune_command)
app.command("eval")(evaluate.eval_command)
app.command("export-logits")(evaluate.export_logits_command)
app.command("gradvar")(experiments.gradvar_command)
app.command("sweep")(experiments.sweep_command)
app.command("ablate")(experiments.ablate_command)
app.command("stability")(experiments.stability_command)
app.command("export-data")(experiments.export_data_command)


def version_callback(value: bool):
    if value:
        typer.echo(f"abnn-lab {__version__}")
        raise typer.Exit()


# Default callback for main app
@app.callback()
def main(
    debug: bool = typer.Option(False, "--debug", help="Enable debug logging (overrides ABNNLAB_LOG)", is_flag=True),
    version: bool = typer.Option(False, "--version", help="Show the version and exit", callback=version_callback, is_eager=True),
):
    """
    abnn-lab: pretrain, convert to ABNN, fine-tune and evaluate uncertainty.

    Log verbosity comes from ABNNLAB_LOG (default INFO); --debug forces DEBUG.
    """
    if debug:
        os.environ["ABNNLAB_LOG"] = LogLevel.DEBUG.value
    configure_logging(LogLevel.DEBUG if debug else settings.ABNNLAB_LOG)
    logger.debug("Debug logging enabled")
