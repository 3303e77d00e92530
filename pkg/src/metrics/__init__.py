"""Accuracy, NLL, ECE and MSP-based OOD detection metrics."""

from src.metrics.schema import CSV_FIELDS, MetricsReport
from src.metrics.calibration import ReliabilityBin, accuracy, ece, nll, reliability_bins
from src.metrics.ood import aupr, auroc, fpr_at_95_tpr, ood_scores, precision_recall_curve
from src.metrics.report import evaluate, report_from_bundles

__all__ = [
    'CSV_FIELDS',
    'MetricsReport',
    'ReliabilityBin',
    'accuracy',
    'aupr',
    'auroc',
    'ece',
    'evaluate',
    'fpr_at_95_tpr',
    'nll',
    'ood_scores',
    'precision_recall_curve',
    'reliability_bins',
    'report_from_bundles',
]
