"""Evaluation report."""
import json
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

CSV_FIELDS: List[str] = [
    "acc", "nll", "ece", "auroc", "aupr", "fpr95",
    "mi_id_mean", "mi_ood_mean", "mi_ratio", "n_id", "n_ood",
]


class MetricsReport(BaseModel):
    """Predictive and uncertainty metrics of one evaluation run.

    OOD fields are null when the dataset carries no OOD set.
    """
    model_config = ConfigDict(extra="forbid")

    acc: float = Field(..., ge=0, le=1, description="Top-1 accuracy on the ID test split")
    nll: float = Field(..., ge=0, description="Mean negative log-likelihood")
    ece: float = Field(..., ge=0, le=1, description="Expected top-label calibration error")
    auroc: Optional[float] = Field(None, ge=0, le=1, description="AUROC of MSP, ID positive")
    aupr: Optional[float] = Field(None, ge=0, le=1, description="Average precision of MSP, ID positive")
    fpr95: Optional[float] = Field(None, ge=0, le=1, description="FPR at 95% TPR")
    mi_id_mean: float = Field(..., description="Mean epistemic uncertainty on ID test samples (nats)")
    mi_ood_mean: Optional[float] = Field(None, description="Mean epistemic uncertainty on OOD samples (nats)")
    mi_ratio: Optional[float] = Field(None, description="mi_ood_mean / mi_id_mean, null when the ID mean is 0")
    n_id: int = Field(..., ge=0)
    n_ood: int = Field(0, ge=0)
    config: Dict[str, Any] = Field(default_factory=dict, description="Echo of the evaluation settings")

    def to_json(self) -> str:
        """Stable JSON: sorted keys, two-space indent, trailing newline."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"

    def csv_row(self) -> Dict[str, str]:
        """One CSV row keyed by CSV_FIELDS; floats use their shortest round-trip form."""
        row = {}
        for name in CSV_FIELDS:
            value = getattr(self, name)
            row[name] = "" if value is None else repr(value)
        return row
