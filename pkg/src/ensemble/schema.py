"""Ensemble configuration and prediction containers."""
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

PROB_ROW_TOLERANCE = 1e-9


class EnsembleConfig(BaseModel):
    """Number of noise draws per mode and the seed of those draws."""
    model_config = ConfigDict(extra="forbid")

    L: int = Field(1, ge=1, description="Noise draws per mode")
    seed: int = Field(0, ge=0, description="Seed of the inference noise")


class PredictiveBundle(BaseModel):
    """Per-member class probabilities and their average.

    Members are ordered mode-major: member ``m * L + l`` is draw l of mode m.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    member_probs: np.ndarray = Field(..., description="(members, batch, classes)")
    mean_probs: np.ndarray = Field(..., description="(batch, classes)")
    member_logits: Optional[np.ndarray] = Field(None, description="(members, batch, classes) pre-softmax outputs")
    num_modes: int = Field(1, ge=1)
    draws: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_probs(self) -> "PredictiveBundle":
        if self.member_probs.ndim != 3 or self.member_probs.shape[0] < 1:
            raise ValueError(f"member_probs must be (members >= 1, batch, classes), got {self.member_probs.shape}")
        if self.mean_probs.shape != self.member_probs.shape[1:]:
            raise ValueError(f"mean_probs shape {self.mean_probs.shape} does not match members {self.member_probs.shape}")
        for name, probs in (("member_probs", self.member_probs), ("mean_probs", self.mean_probs)):
            if np.any(probs < 0.0) or np.any(probs > 1.0):
                raise ValueError(f"{name} has entries outside [0, 1]")
            if np.any(np.abs(probs.sum(axis=-1) - 1.0) > PROB_ROW_TOLERANCE):
                raise ValueError(f"{name} rows do not sum to 1")
        return self

    @property
    def n_members(self) -> int:
        return self.member_probs.shape[0]

    @property
    def batch(self) -> int:
        return self.member_probs.shape[1]

    @classmethod
    def from_members(cls, member_probs: np.ndarray, member_logits: Optional[np.ndarray] = None, num_modes: int = 1, draws: int = 1) -> "PredictiveBundle":
        member_probs = np.asarray(member_probs, dtype=np.float64)
        return cls(
            member_probs=member_probs,
            mean_probs=mean_over_members(member_probs),
            member_logits=member_logits,
            num_modes=num_modes,
            draws=draws,
        )


class UncertaintyDecomposition(BaseModel):
    """Per-sample total, aleatoric and epistemic uncertainty in nats."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    total: np.ndarray
    aleatoric: np.ndarray
    epistemic: np.ndarray


def agreeing_samples(member_values: np.ndarray) -> np.ndarray:
    """Boolean mask of samples on which every member row is identical."""
    return np.all(member_values == member_values[:1], axis=tuple(i for i in range(member_values.ndim) if i != 1))


def mean_over_members(member_values: np.ndarray) -> np.ndarray:
    """Average over the member axis in member order.

    Samples on which all members agree get that shared row, so the mean of
    equal terms is exact.
    """
    total = np.zeros_like(member_values[0])
    for row in member_values:
        total = total + row
    mean = total / member_values.shape[0]
    agree = agreeing_samples(member_values)
    mean[agree] = member_values[0][agree]
    return mean
