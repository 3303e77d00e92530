"""Ensemble inference and the mutual-information uncertainty decomposition."""

from src.ensemble.schema import EnsembleConfig, PredictiveBundle, UncertaintyDecomposition, mean_over_members
from src.ensemble.inference import entropy, export_logits_csv, mutual_information, predict

__all__ = [
    'EnsembleConfig',
    'PredictiveBundle',
    'UncertaintyDecomposition',
    'entropy',
    'export_logits_csv',
    'mean_over_members',
    'mutual_information',
    'predict',
]
