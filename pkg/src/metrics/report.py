"""End-to-end evaluation of a ModeSet on a dataset."""
import logging
from typing import Any, Dict, Optional

import logfire
import numpy as np

from src.constants import DEFAULT_ECE_BINS
from src.data import Dataset
from src.ensemble import EnsembleConfig, PredictiveBundle, mutual_information, predict
from src.metrics.calibration import accuracy, ece, nll
from src.metrics.ood import aupr, auroc, fpr_at_95_tpr, ood_scores
from src.metrics.schema import MetricsReport
from src.train import ModeSet

logger = logging.getLogger(__name__)


def report_from_bundles(
    bundle_id: PredictiveBundle,
    labels: np.ndarray,
    bundle_ood: Optional[PredictiveBundle] = None,
    ece_bins: int = DEFAULT_ECE_BINS,
    config: Optional[Dict[str, Any]] = None,
) -> MetricsReport:
    """Assemble a MetricsReport from ID (and optional OOD) predictions."""
    probs = bundle_id.mean_probs
    mi_id = float(np.mean(mutual_information(bundle_id).epistemic))
    fields: Dict[str, Any] = {
        "acc": accuracy(probs, labels),
        "nll": nll(probs, labels),
        "ece": ece(probs, labels, ece_bins),
        "mi_id_mean": mi_id,
        "n_id": int(probs.shape[0]),
        "config": config or {},
    }
    if bundle_ood is not None and bundle_ood.batch:
        scores_id, scores_ood = ood_scores(bundle_id), ood_scores(bundle_ood)
        mi_ood = float(np.mean(mutual_information(bundle_ood).epistemic))
        fields.update(
            auroc=auroc(scores_id, scores_ood),
            aupr=aupr(scores_id, scores_ood),
            fpr95=fpr_at_95_tpr(scores_id, scores_ood),
            mi_ood_mean=mi_ood,
            mi_ratio=mi_ood / mi_id if mi_id > 0 else None,
            n_ood=int(bundle_ood.batch),
        )
    return MetricsReport(**fields)


def evaluate(
    modes: ModeSet,
    dataset: Dataset,
    cfg: Optional[EnsembleConfig] = None,
    ece_bins: int = DEFAULT_ECE_BINS,
    jobs: int = 1,
) -> MetricsReport:
    """Predict on the test split (and the OOD set when present) and score everything."""
    cfg = cfg or EnsembleConfig()
    with logfire.span("evaluate", M=modes.M, L=cfg.L):
        bundle_id = predict(modes, dataset.test.x, cfg, jobs=jobs)
        bundle_ood = predict(modes, dataset.ood, cfg, jobs=jobs) if dataset.ood is not None and len(dataset.ood) else None
        report = report_from_bundles(
            bundle_id,
            dataset.test.y,
            bundle_ood,
            ece_bins=ece_bins,
            config={"M": modes.M, "L": cfg.L, "seed": cfg.seed, "ece_bins": ece_bins, "form": modes.form.value},
        )
    logger.info(f"Evaluated {modes.M} modes x {cfg.L} draws: acc={report.acc:.4f} ece={report.ece:.4f}")
    return report
