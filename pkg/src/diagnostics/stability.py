"""Training-stability study: metric spread over repeated runs.

The dataset is built once from the base config and shared by every run; the
runs differ only in the training and inference seeds.
"""
import logging
from typing import Dict, List, Optional, Sequence, Union

import logfire
import numpy as np

from src.diagnostics.schema import StabilityProtocol, StabilityReport
from src.errors import ConfigError, DivergenceError
from src.experiments.config import RunConfig
from src.experiments.runner import build_dataset, evaluate_modeset, evaluate_single, run_finetune, run_pretrain, with_value
from src.metrics import MetricsReport

logger = logging.getLogger(__name__)

STABILITY_METRICS = ("acc", "ece", "aupr", "auroc", "fpr95")


def _reseeded(config: RunConfig, seed: int, sections: Sequence[str]) -> RunConfig:
    for section in sections:
        config = with_value(config, f"{section}.seed", seed)
    return config


def _metric_values(report: MetricsReport) -> Dict[str, float]:
    values = {}
    for name in STABILITY_METRICS:
        value = getattr(report, name)
        if value is not None:
            values[name] = float(value)
    return values


def stability_protocol(
    protocol: Union[StabilityProtocol, str],
    R: int,
    base_config: RunConfig,
    seeds: Optional[Sequence[int]] = None,
    jobs: int = 1,
) -> StabilityReport:
    """Run ``R`` repetitions of ``protocol`` and report the std of each metric.

    Args:
        protocol: single, one-ckpt-multi-abnn or multi-ckpt-abnn
        R: Number of runs (at least 3)
        base_config: Config every run starts from
        seeds: One seed per run, defaults to 0..R-1
        jobs: Mode parallelism inside each run

    Raises:
        ConfigError: If R < 3 or the seed list does not have R entries
        DivergenceError: If a run diverges, carrying the run index
    """
    protocol = StabilityProtocol(protocol)
    if R < 3:
        raise ConfigError(f"stability_protocol needs R >= 3, got {R}", pointer="/R")
    seeds = list(range(R)) if seeds is None else [int(s) for s in seeds]
    if len(seeds) != R:
        raise ConfigError(f"Expected {R} seeds, got {len(seeds)}", pointer="/seeds")

    dataset = build_dataset(base_config)
    shared_ckpt = run_pretrain(base_config, dataset) if protocol is StabilityProtocol.ONE_CKPT_MULTI_ABNN else None

    runs: List[Dict[str, float]] = []
    for r, seed in enumerate(seeds):
        with logfire.span("stability run {r}", r=r, protocol=protocol.value, seed=seed):
            try:
                if protocol is StabilityProtocol.SINGLE:
                    config = _reseeded(base_config, seed, ("pretrain",))
                    report = evaluate_single(config, run_pretrain(config, dataset), dataset)
                elif protocol is StabilityProtocol.ONE_CKPT_MULTI_ABNN:
                    config = _reseeded(base_config, seed, ("finetune", "ensemble"))
                    modes = run_finetune(config, shared_ckpt, dataset, jobs=jobs)
                    report = evaluate_modeset(config, modes, dataset, jobs=jobs)
                else:
                    config = _reseeded(base_config, seed, ("pretrain", "finetune", "ensemble"))
                    modes = run_finetune(config, run_pretrain(config, dataset), dataset, jobs=jobs)
                    report = evaluate_modeset(config, modes, dataset, jobs=jobs)
            except DivergenceError as e:
                raise DivergenceError(f"Run {r} (seed {seed}) diverged: {str(e)}", epoch=e.epoch, mode=e.mode, run=r) from e
        runs.append(_metric_values(report))
        logger.info(f"stability {protocol.value} run {r}: acc={report.acc:.4f}")

    present = [name for name in STABILITY_METRICS if all(name in run for run in runs)]
    std = {name: float(np.std([run[name] for run in runs])) for name in present}
    return StabilityReport(protocol=protocol, R=R, seeds=seeds, std=std, runs=runs)
