"""Losses, SGD, pre-training and ABNN fine-tuning."""

from src.train.schema import FinetuneConfig, RandomPrior, TrainConfig
from src.train.losses import (
    LossTerms,
    check_labels,
    map_loss,
    objective_from_logits,
    per_sample_cross_entropy,
    random_prior_loss,
    total_loss,
)
from src.train.optimizer import SGD, learning_rate, sgd_step
from src.train.modeset import ModeSet, load_modeset, parameter_distance, save_modeset
from src.train.loop import DivergenceGuard, finetune_abnn, iter_batches, pretrain, pretrain_ensemble

__all__ = [
    'DivergenceGuard',
    'FinetuneConfig',
    'LossTerms',
    'ModeSet',
    'RandomPrior',
    'SGD',
    'TrainConfig',
    'check_labels',
    'finetune_abnn',
    'iter_batches',
    'learning_rate',
    'load_modeset',
    'map_loss',
    'objective_from_logits',
    'parameter_distance',
    'per_sample_cross_entropy',
    'pretrain',
    'pretrain_ensemble',
    'random_prior_loss',
    'save_modeset',
    'sgd_step',
    'total_loss',
]
