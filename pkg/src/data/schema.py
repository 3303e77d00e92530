"""Dataset containers."""
from typing import Any, Dict, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.errors import DatasetError


class Split(BaseModel):
    """Features of shape (n, d) with integer labels of shape (n,)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray
    y: np.ndarray

    @model_validator(mode="before")
    @classmethod
    def coerce(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        values = dict(values)
        values["x"] = np.asarray(values["x"], dtype=np.float64)
        values["y"] = np.asarray(values["y"], dtype=np.int64)
        return values

    @model_validator(mode="after")
    def check_shapes(self) -> "Split":
        if self.x.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.x.shape}")
        if self.y.shape != (self.x.shape[0],):
            raise ValueError(f"{self.x.shape[0]} feature rows but labels of shape {self.y.shape}")
        return self

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def subset(self, index: np.ndarray) -> "Split":
        return Split(x=self.x[index], y=self.y[index])


class Dataset(BaseModel):
    """Train/test splits, an optional OOD feature set and standardization stats.

    Datasets are treated as immutable: every transformation returns a new one.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = Field(..., description="Generator or source the data came from")
    num_classes: int = Field(..., ge=2)
    train: Split
    test: Split
    ood: Optional[np.ndarray] = Field(None, description="Out-of-distribution features (m, d)")
    feature_mean: Optional[np.ndarray] = Field(None, description="Per-feature train mean applied by standardize()")
    feature_std: Optional[np.ndarray] = Field(None, description="Per-feature train std applied by standardize()")

    @model_validator(mode="after")
    def check_consistency(self) -> "Dataset":
        d = self.train.x.shape[1]
        if self.test.x.shape[1] != d:
            raise ValueError(f"test features have width {self.test.x.shape[1]}, train {d}")
        if self.ood is not None and (self.ood.ndim != 2 or self.ood.shape[1] != d):
            raise ValueError(f"OOD features have shape {self.ood.shape}, expected (m, {d})")
        for split_name, split in (("train", self.train), ("test", self.test)):
            if split.n and (split.y.min() < 0 or split.y.max() >= self.num_classes):
                raise ValueError(f"{split_name} labels outside [0, {self.num_classes})")
        return self

    @property
    def input_dim(self) -> int:
        return self.train.x.shape[1]

    @property
    def standardized(self) -> bool:
        return self.feature_mean is not None

    def standardize(self) -> "Dataset":
        """Standardize every split with statistics of the train split only.

        Constant train features keep a std of 1.

        Raises:
            DatasetError: If the dataset is already standardized or train is empty
        """
        if self.standardized:
            raise DatasetError(f"Dataset {self.name} is already standardized")
        if self.train.n == 0:
            raise DatasetError("Cannot standardize with an empty train split")
        mean = self.train.x.mean(axis=0)
        std = self.train.x.std(axis=0)
        std = np.where(std > 0, std, 1.0)

        def apply(x: np.ndarray) -> np.ndarray:
            return (x - mean) / std

        return Dataset(
            name=self.name,
            num_classes=self.num_classes,
            train=Split(x=apply(self.train.x), y=self.train.y),
            test=Split(x=apply(self.test.x), y=self.test.y),
            ood=None if self.ood is None else apply(self.ood),
            feature_mean=mean,
            feature_std=std,
        )
