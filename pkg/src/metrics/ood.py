"""OOD detection with the maximum softmax probability.

In-distribution samples are the positive class and a higher score means
"more in-distribution". All three detectors count exactly (integer counts,
ties included), so they agree with pair-counting and threshold-enumerating
references bit for bit.
"""
import math
from typing import Sequence, Tuple, Union

import numpy as np

from src.constants import FPR_TARGET_TPR
from src.ensemble import PredictiveBundle
from src.errors import MetricError

Scores = Union[np.ndarray, Sequence[float]]


def ood_scores(bundle: Union[PredictiveBundle, np.ndarray]) -> np.ndarray:
    """Maximum of the mean predictive distribution per sample."""
    probs = bundle.mean_probs if isinstance(bundle, PredictiveBundle) else np.asarray(bundle, dtype=np.float64)
    return probs.max(axis=-1)


def _check(scores_id: Scores, scores_ood: Scores) -> Tuple[np.ndarray, np.ndarray]:
    scores_id = np.asarray(scores_id, dtype=np.float64).reshape(-1)
    scores_ood = np.asarray(scores_ood, dtype=np.float64).reshape(-1)
    if scores_id.size == 0 or scores_ood.size == 0:
        raise MetricError(f"OOD metrics need non-empty score sets, got {scores_id.size} ID and {scores_ood.size} OOD")
    if not (np.all(np.isfinite(scores_id)) and np.all(np.isfinite(scores_ood))):
        raise MetricError("OOD scores must be finite")
    return scores_id, scores_ood


def _count_at_least(sorted_scores: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Number of scores >= each threshold."""
    return sorted_scores.size - np.searchsorted(sorted_scores, thresholds, side="left")


def auroc(scores_id: Scores, scores_ood: Scores) -> float:
    """P(score_id > score_ood) + 0.5 * P(score_id == score_ood)."""
    scores_id, scores_ood = _check(scores_id, scores_ood)
    sorted_id = np.sort(scores_id)
    above = sorted_id.size - np.searchsorted(sorted_id, scores_ood, side="right")
    ties = np.searchsorted(sorted_id, scores_ood, side="right") - np.searchsorted(sorted_id, scores_ood, side="left")
    doubled = 2 * int(above.sum()) + int(ties.sum())
    return doubled / (2 * scores_id.size * scores_ood.size)


def precision_recall_curve(scores_id: Scores, scores_ood: Scores) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds descending, true-positive counts, false-positive counts) at every distinct score."""
    scores_id, scores_ood = _check(scores_id, scores_ood)
    thresholds = np.unique(np.concatenate([scores_id, scores_ood]))[::-1]
    tp = _count_at_least(np.sort(scores_id), thresholds)
    fp = _count_at_least(np.sort(scores_ood), thresholds)
    return thresholds, tp, fp


def aupr(scores_id: Scores, scores_ood: Scores) -> float:
    """Average precision with ID as positive: sum of (R_k - R_{k-1}) * P_k over distinct thresholds."""
    _, tp, fp = precision_recall_curve(scores_id, scores_ood)
    n_id = int(np.size(scores_id))
    terms = []
    previous = 0
    for tp_k, fp_k in zip(tp.tolist(), fp.tolist()):
        if tp_k != previous:
            terms.append((tp_k - previous) / n_id * (tp_k / (tp_k + fp_k)))
        previous = tp_k
    return math.fsum(terms)


def fpr_at_95_tpr(scores_id: Scores, scores_ood: Scores, target: float = FPR_TARGET_TPR) -> float:
    """FPR at the largest threshold whose TPR reaches ``target``.

    Samples with score >= threshold are predicted in-distribution.
    """
    scores_id, scores_ood = _check(scores_id, scores_ood)
    sorted_id = np.sort(scores_id)
    candidates = np.unique(scores_id)[::-1]
    tpr = _count_at_least(sorted_id, candidates) / scores_id.size
    threshold = candidates[int(np.argmax(tpr >= target))]
    false_positives = int(_count_at_least(np.sort(scores_ood), np.array([threshold]))[0])
    return false_positives / scores_ood.size
