"""Ensemble inference over M modes x L noise draws and the entropy decomposition."""
import csv
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from src.autodiff import Tensor
from src.ensemble.schema import (
    EnsembleConfig,
    PredictiveBundle,
    UncertaintyDecomposition,
    agreeing_samples,
    mean_over_members,
)
from src.errors import MetricError, ModeSetError, ShapeError
from src.model import Network
from src.train import ModeSet
from src.utils.parallel import parallel_map
from src.utils.seeding import make_rng

logger = logging.getLogger(__name__)

SUM_TOLERANCE = 1e-6


def _softmax(logits: np.ndarray) -> np.ndarray:
    return Tensor(logits).softmax(axis=-1).data


def predict(
    modes: Union[ModeSet, Sequence[Network]],
    x: Union[Tensor, np.ndarray],
    cfg: Optional[EnsembleConfig] = None,
    jobs: int = 1,
) -> PredictiveBundle:
    """Average softmax outputs over every (mode, draw) pair.

    Draw l of mode m uses noise from the stream (cfg.seed, m, l), one vector
    per BNL layer shared across the batch. Networks are evaluated in eval mode
    and are not mutated.

    Args:
        modes: ModeSet or plain list of networks sharing one architecture
        x: Inputs of shape (batch, input_dim)
        cfg: Draws per mode and inference seed
        jobs: Member forwards evaluated concurrently

    Raises:
        ModeSetError: If there are no modes
        ShapeError: If x does not match the input dimension
    """
    cfg = cfg or EnsembleConfig()
    networks = list(modes.modes) if isinstance(modes, ModeSet) else list(modes)
    if not networks:
        raise ModeSetError("predict needs at least one mode")
    x = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != networks[0].spec.input_dim:
        raise ShapeError(f"predict: input shape {x.shape} does not match input_dim {networks[0].spec.input_dim}")

    def member(index: int) -> np.ndarray:
        m, l = divmod(index, cfg.L)
        network = networks[m]
        noise = network.sample_noise(make_rng(cfg.seed, m, l))
        return network.forward(x, training=False, noise=noise).data

    logits = np.stack(parallel_map(member, len(networks) * cfg.L, jobs))
    probs = np.stack([_softmax(member_logits) for member_logits in logits])
    logger.debug(f"Ensemble of {len(networks)} modes x {cfg.L} draws on {x.shape[0]} samples")
    return PredictiveBundle.from_members(probs, member_logits=logits, num_modes=len(networks), draws=cfg.L)


def _row_entropy(probs: np.ndarray) -> np.ndarray:
    safe = np.where(probs > 0.0, probs, 1.0)
    return -np.sum(np.where(probs > 0.0, probs * np.log(safe), 0.0), axis=-1)


def entropy(probs: Union[np.ndarray, Sequence[float]]) -> float:
    """Shannon entropy in nats with 0 log 0 := 0.

    Raises:
        MetricError: On a negative entry or a vector not summing to 1 (+-1e-6)
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise MetricError(f"entropy expects a non-empty probability vector, got shape {probs.shape}")
    if np.any(probs < 0.0):
        raise MetricError("entropy: probabilities must be non-negative")
    if abs(probs.sum() - 1.0) > SUM_TOLERANCE:
        raise MetricError(f"entropy: probabilities sum to {probs.sum():.9f}, expected 1")
    return float(_row_entropy(probs))


def mutual_information(bundle: PredictiveBundle) -> UncertaintyDecomposition:
    """Split predictive entropy into aleatoric and epistemic parts.

    total = H(mean_probs), aleatoric = mean over members of H(member),
    epistemic = total - aleatoric (the mutual information between the label
    and the member). Samples on which all members agree get epistemic 0
    exactly.
    """
    total = _row_entropy(bundle.mean_probs)
    member_entropy = _row_entropy(bundle.member_probs)
    aleatoric = mean_over_members(member_entropy)
    agree = agreeing_samples(bundle.member_probs)
    aleatoric[agree] = total[agree]
    return UncertaintyDecomposition(total=total, aleatoric=aleatoric, epistemic=total - aleatoric)


def export_logits_csv(bundle: PredictiveBundle, path: Union[str, Path]) -> None:
    """Write one row per (sample, member): sample_id, member_id, logit_0..logit_{C-1}."""
    if bundle.member_logits is None:
        raise MetricError("Bundle carries no member logits to export")
    logits = bundle.member_logits
    num_classes = logits.shape[2]
    fieldnames = ["sample_id", "member_id"] + [f"logit_{c}" for c in range(num_classes)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for sample in range(logits.shape[1]):
            for member in range(logits.shape[0]):
                row = {"sample_id": sample, "member_id": member}
                row.update({f"logit_{c}": repr(float(logits[member, sample, c])) for c in range(num_classes)})
                writer.writerow(row)
    logger.info(f"Exported {logits.shape[0]} x {logits.shape[1]} member logits to {path}")
