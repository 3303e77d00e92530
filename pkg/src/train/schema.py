"""Training configuration and the random prior."""
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.constants import DEFAULT_ALPHA, DEFAULT_NUM_MODES, DEFAULT_PRIOR_P
from src.utils.seeding import make_rng


class TrainConfig(BaseModel):
    """Hyperparameters of one SGD training run."""
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(..., ge=0, description="Passes over the training split")
    batch_size: int = Field(..., ge=2, description="Mini-batch size")
    lr: float = Field(..., gt=0, description="Base learning rate")
    momentum: float = Field(0.9, ge=0, lt=1, description="Heavy-ball momentum")
    weight_decay: float = Field(0.0, ge=0, description="Decoupled L2 weight decay")
    milestones: List[int] = Field(default_factory=list, description="Epochs at which lr is multiplied by gamma_lr")
    gamma_lr: float = Field(0.1, gt=0, description="Learning-rate multiplier applied at each milestone")
    seed: int = Field(0, ge=0, description="Seed of shuffling and noise")

    @field_validator("milestones")
    @classmethod
    def check_milestones(cls, value: List[int]) -> List[int]:
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("milestones must be strictly increasing")
        if any(m < 0 for m in value):
            raise ValueError("milestones must be non-negative")
        return value


class FinetuneConfig(TrainConfig):
    """ABNN fine-tuning: a TrainConfig plus the mode and noise settings."""

    M: int = Field(DEFAULT_NUM_MODES, ge=1, description="Number of modes fine-tuned from the checkpoint")
    prior_p: float = Field(DEFAULT_PRIOR_P, ge=0, le=1, description="Bernoulli parameter of the random prior")
    alpha: float = Field(DEFAULT_ALPHA, ge=0, description="BNL noise scale")
    freeze_all_but_norm: bool = Field(True, description="Train only the normalization parameters")
    update_running_stats: bool = Field(False, description="Use batch statistics (with EMA updates) instead of frozen running statistics")

    @model_validator(mode="after")
    def check_alpha(self) -> "FinetuneConfig":
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        return self


class RandomPrior(BaseModel):
    """Per-class binary weights eta, fixed for the lifetime of one mode."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    eta: List[int] = Field(..., min_length=1, description="One weight in {0, 1} per class")
    bernoulli_p: float = Field(..., ge=0, le=1, description="Probability of eta_c == 1")
    seed: int = Field(..., ge=0, description="Seed the weights were drawn from")

    @field_validator("eta")
    @classmethod
    def check_eta(cls, value: List[int]) -> List[int]:
        if any(v not in (0, 1) for v in value):
            raise ValueError("eta entries must be 0 or 1")
        return value

    @classmethod
    def sample(cls, num_classes: int, p: float, seed: int) -> "RandomPrior":
        """Draw eta_c ~ Bernoulli(p) independently per class."""
        draws = make_rng(seed).random(num_classes) < p
        return cls(eta=[int(d) for d in draws], bernoulli_p=p, seed=seed)

    @classmethod
    def off(cls, num_classes: int) -> "RandomPrior":
        """All-zero prior: the objective reduces to the MAP loss."""
        return cls(eta=[0] * num_classes, bernoulli_p=0.0, seed=0)

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.eta, dtype=np.float64)
