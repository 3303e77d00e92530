"""Gradient-variance and training-stability diagnostics."""

from src.diagnostics.schema import DESIGNATED_GROUPS, GradVarKind, GradVarReport, StabilityProtocol, StabilityReport
from src.diagnostics.gradvar import (
    compare_gradient_variance,
    gradient_variance,
    gradient_variance_from_config,
    network_for,
    pooled_variance,
)
from src.diagnostics.stability import STABILITY_METRICS, stability_protocol

__all__ = [
    'DESIGNATED_GROUPS',
    'GradVarKind',
    'GradVarReport',
    'STABILITY_METRICS',
    'StabilityProtocol',
    'StabilityReport',
    'compare_gradient_variance',
    'gradient_variance',
    'gradient_variance_from_config',
    'network_for',
    'pooled_variance',
    'stability_protocol',
]
