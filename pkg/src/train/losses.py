"""MAP loss, the random-prior perturbation and their sum.

The weight prior of the MAP objective is not part of the loss value: it is
realized as decoupled weight decay inside the optimizer step.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.autodiff import Tensor, gather
from src.errors import LabelError, ShapeError
from src.model import Network
from src.train.schema import RandomPrior

Batch = Tuple[Union[Tensor, np.ndarray], np.ndarray]


def check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Validate integer labels in [0, num_classes) and return them as int64."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ShapeError(f"labels must be a non-empty vector, got shape {labels.shape}")
    if not np.all(np.equal(np.mod(labels, 1), 0)):
        raise LabelError("labels must be integers")
    labels = labels.astype(np.int64)
    bad = labels[(labels < 0) | (labels >= num_classes)]
    if bad.size:
        raise LabelError(f"label {int(bad[0])} out of range [0, {num_classes})")
    return labels


def per_sample_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """-log softmax(logits)[i, y_i] for every row i."""
    labels = check_labels(labels, logits.shape[-1])
    if logits.shape[0] != labels.shape[0]:
        raise ShapeError(f"cross_entropy: {logits.shape[0]} logit rows for {labels.shape[0]} labels")
    return -gather(logits.log_softmax(axis=-1), labels)


@dataclass
class LossTerms:
    """The terms of the fine-tuning objective computed from one forward pass."""
    map: Tensor
    prior: Tensor
    total: Tensor


def objective_from_logits(logits: Tensor, labels: np.ndarray, prior: Optional[RandomPrior] = None) -> LossTerms:
    """L_MAP, the perturbation E and L = L_MAP + E on shared logits.

    E is the batch mean of eta_{y_i} * CE_i, so L equals the batch mean of
    (1 + eta_{y_i}) * CE_i.
    """
    ce = per_sample_cross_entropy(logits, labels)
    map_term = ce.mean()
    if prior is None:
        prior_term = Tensor(0.0)
    else:
        eta = prior.weights
        if eta.shape[0] != logits.shape[-1]:
            raise ShapeError(f"random prior has {eta.shape[0]} classes, logits have {logits.shape[-1]}")
        prior_term = (ce * Tensor(eta[np.asarray(labels, dtype=np.int64)])).mean()
    return LossTerms(map=map_term, prior=prior_term, total=map_term + prior_term)


def _logits(
    network: Network,
    batch: Batch,
    training: bool,
    noise: Optional[Sequence[np.ndarray]],
    update_running: bool,
) -> Tuple[Tensor, np.ndarray]:
    x, labels = batch
    labels = check_labels(labels, network.spec.num_classes)
    return network.forward(x, training=training, noise=noise, update_running=update_running), labels


def map_loss(
    network: Network,
    batch: Batch,
    training: bool = True,
    noise: Optional[Sequence[np.ndarray]] = None,
    update_running: bool = True,
) -> Tensor:
    """Mean cross-entropy of ``network`` on ``batch``.

    Raises:
        LabelError: If a label is outside [0, num_classes)
    """
    logits, labels = _logits(network, batch, training, noise, update_running)
    return per_sample_cross_entropy(logits, labels).mean()


def random_prior_loss(
    network: Network,
    batch: Batch,
    prior: RandomPrior,
    training: bool = True,
    noise: Optional[Sequence[np.ndarray]] = None,
    update_running: bool = True,
) -> Tensor:
    """E = mean over the batch of eta_{y_i} * (-log P(y_i | x_i))."""
    logits, labels = _logits(network, batch, training, noise, update_running)
    return objective_from_logits(logits, labels, prior).prior


def total_loss(
    network: Network,
    batch: Batch,
    prior: Optional[RandomPrior] = None,
    training: bool = True,
    noise: Optional[Sequence[np.ndarray]] = None,
    update_running: bool = True,
) -> LossTerms:
    """All objective terms from a single forward pass."""
    logits, labels = _logits(network, batch, training, noise, update_running)
    return objective_from_logits(logits, labels, prior)
