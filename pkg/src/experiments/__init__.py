"""Run configuration and experiment pipelines."""

from src.experiments.config import (
    BlobsDataset,
    EvalConfig,
    GradVarConfig,
    IdxDataset,
    RunConfig,
    TwoMoonsDataset,
    json_pointer,
    load_run_config,
    parse_run_config,
)
from src.experiments.runner import (
    ABLATION_GRID,
    PipelineResult,
    ablate,
    build_dataset,
    evaluate_modeset,
    evaluate_single,
    inference_config,
    run_deep_ensemble,
    run_finetune,
    run_pipeline,
    run_pretrain,
    sweep,
    with_value,
    write_rows,
)

__all__ = [
    'ABLATION_GRID',
    'BlobsDataset',
    'EvalConfig',
    'GradVarConfig',
    'IdxDataset',
    'PipelineResult',
    'RunConfig',
    'TwoMoonsDataset',
    'ablate',
    'build_dataset',
    'evaluate_modeset',
    'evaluate_single',
    'inference_config',
    'json_pointer',
    'load_run_config',
    'parse_run_config',
    'run_deep_ensemble',
    'run_finetune',
    'run_pipeline',
    'run_pretrain',
    'sweep',
    'with_value',
    'write_rows',
]
