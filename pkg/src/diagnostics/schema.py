"""Diagnostic reports."""
from enum import Enum
from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field


class GradVarKind(str, Enum):
    """Network family whose gradients are measured."""
    SINGLE = "single"
    VI = "vi"
    ABNN = "abnn"


class StabilityProtocol(str, Enum):
    """How the repeated runs of a stability study differ.

    SINGLE: independent single models. ONE_CKPT_MULTI_ABNN: one pretrained
    checkpoint, independent ABNN fine-tunes. MULTI_CKPT_ABNN: independent
    checkpoints, each fine-tuned once.
    """
    SINGLE = "single"
    ONE_CKPT_MULTI_ABNN = "one-ckpt-multi-abnn"
    MULTI_CKPT_ABNN = "multi-ckpt-abnn"


# Parameter groups whose gradients make up the reported variance of each kind
DESIGNATED_GROUPS: Dict[GradVarKind, List[str]] = {
    GradVarKind.SINGLE: ["linear_weights"],
    GradVarKind.VI: ["linear_weights"],
    GradVarKind.ABNN: ["norm_gamma", "norm_beta"],
}


class GradVarReport(BaseModel):
    """Pooled population variance of per-step gradient entries.

    ``variance`` covers the designated group of the kind (all linear weights
    for single, W_mu for vi, the BNL gamma and beta for abnn).
    ``group_variances`` reports every non-empty trainable group the same way, with
    gamma and beta pooled as ``norm_affine``.
    """
    model_config = ConfigDict(extra="forbid")

    kind: GradVarKind
    variance: float = Field(..., ge=0)
    designated_groups: List[str]
    n_entries: int = Field(..., ge=0, description="Parameters in the designated groups")
    group_variances: Dict[str, float] = Field(default_factory=dict)
    n_steps: int = Field(..., ge=1)
    batch_size: int = Field(..., ge=2)
    seed: int
    alpha: float
    sigma_init: float
    along_trajectory: bool = False
    lr: float = 0.0
    from_pretrained: bool = Field(False, description="abnn measured on a converted pretrained network")


class StabilityReport(BaseModel):
    """Standard deviation of each metric over R repeated runs."""
    model_config = ConfigDict(extra="forbid")

    protocol: StabilityProtocol
    R: int = Field(..., ge=3)
    seeds: List[int]
    std: Dict[str, float] = Field(..., description="Population std per metric")
    runs: List[Dict[str, float]] = Field(default_factory=list, description="Metric values of every run")
