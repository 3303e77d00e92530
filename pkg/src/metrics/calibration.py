"""Accuracy, negative log-likelihood and expected calibration error."""
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.constants import DEFAULT_ECE_BINS, PROB_FLOOR
from src.errors import MetricError


def _check(probs: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise MetricError(f"expected non-empty (n, classes) probabilities, got shape {probs.shape}")
    if labels.shape != (probs.shape[0],):
        raise MetricError(f"{probs.shape[0]} predictions but labels of shape {labels.shape}")
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise MetricError(f"labels outside [0, {probs.shape[1]})")
    return probs, labels.astype(np.int64)


def accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    """Share of samples whose arg-max class equals the label."""
    probs, labels = _check(probs, labels)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def nll(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean -log p(label), with probabilities floored at 1e-300."""
    probs, labels = _check(probs, labels)
    picked = probs[np.arange(probs.shape[0]), labels]
    return float(np.mean(-np.log(np.maximum(picked, PROB_FLOOR))))


class ReliabilityBin(BaseModel):
    """One confidence bin (lower, upper] with its occupancy, accuracy and mean confidence."""
    model_config = ConfigDict(frozen=True)

    lower: float
    upper: float
    count: int
    accuracy: float
    confidence: float


def bin_edges(n_bins: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_bins + 1)


def bin_members(confidence: np.ndarray, edges: np.ndarray, b: int) -> np.ndarray:
    """Mask of confidences in bin b: (edges[b], edges[b+1]], the first bin also holding 0."""
    mask = (confidence > edges[b]) & (confidence <= edges[b + 1])
    if b == 0:
        mask |= confidence == edges[0]
    return mask


def reliability_bins(probs: np.ndarray, labels: np.ndarray, n_bins: int = DEFAULT_ECE_BINS) -> List[ReliabilityBin]:
    """Equal-width bins on top-label confidence, for reliability diagrams and ECE."""
    if n_bins < 1:
        raise MetricError(f"n_bins must be >= 1, got {n_bins}")
    probs, labels = _check(probs, labels)
    confidence = probs.max(axis=1)
    correct = (np.argmax(probs, axis=1) == labels).astype(np.float64)
    edges = bin_edges(n_bins)
    bins = []
    for b in range(n_bins):
        mask = bin_members(confidence, edges, b)
        count = int(mask.sum())
        bins.append(ReliabilityBin(
            lower=float(edges[b]),
            upper=float(edges[b + 1]),
            count=count,
            accuracy=float(np.mean(correct[mask])) if count else 0.0,
            confidence=float(np.mean(confidence[mask])) if count else 0.0,
        ))
    return bins


def ece(probs: np.ndarray, labels: np.ndarray, n_bins: int = DEFAULT_ECE_BINS) -> float:
    """Expected top-label calibration error.

    Sum over bins of (|B_b| / n) * |acc(B_b) - conf(B_b)|; empty bins add 0.

    Raises:
        MetricError: On empty input or n_bins < 1
    """
    bins = reliability_bins(probs, labels, n_bins)
    n = sum(b.count for b in bins)
    total = 0.0
    for b in bins:
        if b.count:
            total += (b.count / n) * abs(b.accuracy - b.confidence)
    return total
