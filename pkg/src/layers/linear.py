"""Bias-free linear layer.

There is no bias term: the beta of the following normalization subsumes it.
"""
import numpy as np

from src.autodiff import Tensor
from src.errors import ShapeError


def he_uniform(rng: np.random.Generator, out_features: int, in_features: int) -> np.ndarray:
    """He-uniform initialization, U(-sqrt(6 / fan_in), sqrt(6 / fan_in))."""
    bound = np.sqrt(6.0 / in_features)
    return rng.uniform(-bound, bound, size=(out_features, in_features))


class Linear:
    """y = x @ W^T with W of shape (out_features, in_features)."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        if in_features < 1 or out_features < 1:
            raise ShapeError(f"Linear needs positive extents, got ({out_features}, {in_features})")
        self.weight = Tensor(he_uniform(rng, out_features, in_features), requires_grad=True, name="weight")

    @property
    def in_features(self) -> int:
        return self.weight.shape[1]

    @property
    def out_features(self) -> int:
        return self.weight.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return linear_forward(x, self.weight)

    def __repr__(self) -> str:
        return f"Linear({self.in_features} -> {self.out_features})"


def linear_forward(x: Tensor, weight: Tensor) -> Tensor:
    return x @ weight.transpose()
