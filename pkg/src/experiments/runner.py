"""Experiment pipelines driven by a RunConfig: pretrain, fine-tune, evaluate, sweep and ablate."""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import logfire
import numpy as np
from pydantic import ValidationError

from src.constants import DEFAULT_NUM_MODES, DEFAULT_PRIOR_P, LR_SWEEP_MULTIPLIERS
from src.data import Dataset, gen_blobs, gen_two_moons, holdout_ood, load_idx_dataset
from src.ensemble import EnsembleConfig
from src.errors import ConfigError
from src.experiments.config import BlobsDataset, IdxDataset, RunConfig, TwoMoonsDataset, json_pointer
from src.metrics import CSV_FIELDS, MetricsReport, evaluate
from src.model import Checkpoint
from src.train import ModeSet, finetune_abnn, pretrain, pretrain_ensemble
from src.utils.seeding import make_rng

logger = logging.getLogger(__name__)


def build_dataset(config: RunConfig, standardize: bool = True) -> Dataset:
    """Generate or load the configured dataset, by default standardized with train statistics."""
    spec = config.dataset
    if isinstance(spec, TwoMoonsDataset):
        dataset = gen_two_moons(spec.n, spec.noise_std, spec.seed, spec.test_fraction, spec.n_ood)
    elif isinstance(spec, BlobsDataset):
        dataset = gen_blobs(spec.k, spec.n, spec.spread, spec.seed, spec.test_fraction, spec.n_ood)
    elif isinstance(spec, IdxDataset):
        dataset = load_idx_dataset(
            config.resolve(spec.train_images),
            config.resolve(spec.train_labels),
            config.resolve(spec.test_images),
            config.resolve(spec.test_labels),
            num_classes=spec.num_classes,
            standardize=False,
        )
        if spec.subset is not None and spec.subset < dataset.train.n:
            keep = np.sort(make_rng(spec.seed).permutation(dataset.train.n)[:spec.subset])
            dataset = dataset.model_copy(update={"train": dataset.train.subset(keep)})
        if spec.held_classes:
            dataset = holdout_ood(dataset, spec.held_classes)
    else:
        raise ConfigError(f"Unsupported dataset kind {type(spec).__name__}", pointer="/dataset/kind")
    return dataset.standardize() if standardize else dataset


def check_arch(config: RunConfig, dataset: Dataset) -> None:
    if config.arch.input_dim != dataset.input_dim:
        raise ConfigError(f"arch.input_dim is {config.arch.input_dim} but the dataset has {dataset.input_dim} features", pointer="/arch/input_dim")
    if config.arch.num_classes != dataset.num_classes:
        raise ConfigError(f"arch.num_classes is {config.arch.num_classes} but the dataset has {dataset.num_classes} classes", pointer="/arch/num_classes")


def run_pretrain(config: RunConfig, dataset: Optional[Dataset] = None) -> Checkpoint:
    dataset = dataset or build_dataset(config)
    check_arch(config, dataset)
    return pretrain(config.arch, dataset, config.pretrain)


def run_finetune(config: RunConfig, ckpt: Checkpoint, dataset: Optional[Dataset] = None, jobs: int = 1) -> ModeSet:
    dataset = dataset or build_dataset(config)
    check_arch(config, dataset)
    return finetune_abnn(ckpt, dataset, config.finetune, jobs=jobs)


def inference_config(config: RunConfig, modes: ModeSet) -> EnsembleConfig:
    """The configured ensemble settings; modes without noise need a single draw."""
    if any(mode.stochastic_layers for mode in modes.modes):
        return config.ensemble
    return EnsembleConfig(L=1, seed=config.ensemble.seed)


def evaluate_modeset(config: RunConfig, modes: ModeSet, dataset: Optional[Dataset] = None, jobs: int = 1) -> MetricsReport:
    dataset = dataset or build_dataset(config)
    return evaluate(modes, dataset, inference_config(config, modes), ece_bins=config.eval.ece_bins, jobs=jobs)


def evaluate_single(config: RunConfig, ckpt: Checkpoint, dataset: Optional[Dataset] = None) -> MetricsReport:
    return evaluate_modeset(config, ModeSet.single(ckpt.network), dataset)


def run_deep_ensemble(config: RunConfig, dataset: Optional[Dataset] = None, jobs: int = 1) -> ModeSet:
    """Deep-ensemble baseline with as many members as fine-tuned modes."""
    dataset = dataset or build_dataset(config)
    check_arch(config, dataset)
    return pretrain_ensemble(config.arch, dataset, config.pretrain, config.finetune.M, jobs=jobs)


@dataclass
class PipelineResult:
    """Everything one end-to-end run produces."""
    dataset: Dataset
    checkpoint: Checkpoint
    modes: ModeSet
    abnn: MetricsReport
    single: MetricsReport


def run_pipeline(config: RunConfig, jobs: int = 1, ckpt: Optional[Checkpoint] = None) -> PipelineResult:
    """Pretrain (unless ``ckpt`` is given), fine-tune, and evaluate both the ABNN and the single model."""
    with logfire.span("pipeline"):
        dataset = build_dataset(config)
        ckpt = ckpt or run_pretrain(config, dataset)
        modes = run_finetune(config, ckpt, dataset, jobs=jobs)
        return PipelineResult(
            dataset=dataset,
            checkpoint=ckpt,
            modes=modes,
            abnn=evaluate_modeset(config, modes, dataset, jobs=jobs),
            single=evaluate_single(config, ckpt, dataset),
        )


def with_value(config: RunConfig, param: str, value: Any) -> RunConfig:
    """Copy of ``config`` with the dotted ``param`` (e.g. ``finetune.lr``) set to ``value``.

    Raises:
        ConfigError: If the path does not exist or the value fails validation
    """
    data = config.model_dump(mode="json")
    *parents, leaf = param.split(".")
    node = data
    for key in parents:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"Unknown config path {param}", pointer="/" + param.replace(".", "/"))
        node = node[key]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"Unknown config path {param}", pointer="/" + param.replace(".", "/"))
    node[leaf] = value
    try:
        updated = RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        pointer = json_pointer(tuple(first["loc"]))
        raise ConfigError(f"{pointer}: {first['msg']}", pointer=pointer) from e
    updated._base_dir = config._base_dir
    return updated


def _current_value(config: RunConfig, param: str) -> Any:
    node: Any = config.model_dump(mode="json")
    for key in param.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"Unknown config path {param}", pointer="/" + param.replace(".", "/"))
        node = node[key]
    return node


def sweep(
    config: RunConfig,
    param: str = "finetune.lr",
    values: Optional[Sequence[Any]] = None,
    relative: bool = False,
    jobs: int = 1,
) -> List[Dict[str, str]]:
    """Evaluate the ABNN once per value of ``param``.

    With ``relative`` the values multiply the configured value; without
    explicit values a learning-rate parameter sweeps the multipliers
    0.1, 0.2, 0.5, 1, 2, 5 and 10. Parameters outside the ``pretrain`` and
    ``dataset`` sections reuse one pretrained checkpoint.

    Returns:
        One CSV row per value: param, value, then the MetricsReport fields
    """
    if values is None:
        if not param.endswith("lr"):
            raise ConfigError(f"No default sweep values for {param}", pointer="/" + param.replace(".", "/"))
        values, relative = list(LR_SWEEP_MULTIPLIERS), True
    base_value = _current_value(config, param)
    shared = not param.startswith(("pretrain.", "dataset.", "arch."))
    dataset = build_dataset(config) if shared else None
    ckpt = run_pretrain(config, dataset) if shared else None

    rows = []
    for value in values:
        applied = base_value * value if relative else value
        point = with_value(config, param, applied)
        with logfire.span("sweep point {param}={value}", param=param, value=applied):
            if shared:
                modes = run_finetune(point, ckpt, dataset, jobs=jobs)
                report = evaluate_modeset(point, modes, dataset, jobs=jobs)
            else:
                report = run_pipeline(point, jobs=jobs).abnn
        logger.info(f"sweep {param}={applied!r}: acc={report.acc:.4f} fpr95={report.fpr95}")
        rows.append({"param": param, "value": repr(value), **report.csv_row()})
    return rows


ABLATION_GRID = ((0, 0), (1, 0), (0, 1), (1, 1))


def ablate(config: RunConfig, jobs: int = 1) -> List[Dict[str, str]]:
    """Random prior (RP) x multi-mode (MM) grid on one shared checkpoint.

    RP off sets prior_p to 0, MM off sets M to 1. The "on" settings come from
    the config, falling back to the library defaults when the config itself
    switches the component off.

    Returns:
        Four CSV rows labeled (RP, MM) in the order (0,0), (1,0), (0,1), (1,1)
    """
    dataset = build_dataset(config)
    ckpt = run_pretrain(config, dataset)
    prior_on = config.finetune.prior_p if config.finetune.prior_p > 0 else DEFAULT_PRIOR_P
    modes_on = config.finetune.M if config.finetune.M > 1 else DEFAULT_NUM_MODES

    rows = []
    for rp, mm in ABLATION_GRID:
        point = with_value(config, "finetune.prior_p", prior_on if rp else 0.0)
        point = with_value(point, "finetune.M", modes_on if mm else 1)
        with logfire.span("ablation RP={rp} MM={mm}", rp=rp, mm=mm):
            modes = run_finetune(point, ckpt, dataset, jobs=jobs)
            report = evaluate_modeset(point, modes, dataset, jobs=jobs)
        rows.append({"RP": str(rp), "MM": str(mm), **report.csv_row()})
    return rows


def write_rows(rows: List[Dict[str, str]], path: Union[str, Path], leading: Sequence[str]) -> None:
    """Write CSV rows whose columns are ``leading`` followed by the MetricsReport fields."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(leading) + CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
