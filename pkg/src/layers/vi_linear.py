"""Variational linear layer with the reparametrization trick.

Each forward draws E ~ N(0, 1) of the weight's shape and uses
W = W_mu + E * W_sigma. W_sigma is stored as softplus(rho), so it is
non-negative by construction. This layer exists only as the baseline of the
gradient-variance diagnostics.
"""
from typing import Optional

import numpy as np

from src.autodiff import Tensor
from src.constants import DEFAULT_VI_SIGMA_INIT, VI_RHO_FLOOR
from src.errors import ShapeError
from src.layers.linear import he_uniform, linear_forward
from src.utils.seeding import make_rng


def inverse_softplus(sigma: np.ndarray) -> np.ndarray:
    """rho such that softplus(rho) == sigma; sigma == 0 maps to a floor with softplus exactly 0."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ValueError("W_sigma must be non-negative")
    safe = np.where(sigma > 0, sigma, 1.0)
    return np.where(sigma > 0, np.log(np.expm1(safe)), VI_RHO_FLOOR)


class VILinear:
    """Gaussian mean-field linear layer, W ~ N(W_mu, W_sigma^2)."""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        sigma_init: float = DEFAULT_VI_SIGMA_INIT,
        noise_seed: int = 0,
    ):
        if in_features < 1 or out_features < 1:
            raise ShapeError(f"VILinear needs positive extents, got ({out_features}, {in_features})")
        self.w_mu = Tensor(he_uniform(rng, out_features, in_features), requires_grad=True, name="w_mu")
        self.w_rho = Tensor(inverse_softplus(np.full((out_features, in_features), sigma_init)), requires_grad=True, name="w_rho")
        self.noise_seed = int(noise_seed)
        self.calls = 0

    @classmethod
    def from_params(cls, w_mu: np.ndarray, w_sigma: np.ndarray, noise_seed: int = 0) -> "VILinear":
        w_mu = np.asarray(w_mu, dtype=np.float64)
        if np.shape(w_sigma) != w_mu.shape:
            raise ShapeError(f"vi_linear: W_mu shape {w_mu.shape} and W_sigma shape {np.shape(w_sigma)} differ")
        layer = cls.__new__(cls)
        layer.w_mu = Tensor(w_mu, requires_grad=True, name="w_mu")
        layer.w_rho = Tensor(inverse_softplus(w_sigma), requires_grad=True, name="w_rho")
        layer.noise_seed = int(noise_seed)
        layer.calls = 0
        return layer

    @property
    def in_features(self) -> int:
        return self.w_mu.shape[1]

    @property
    def out_features(self) -> int:
        return self.w_mu.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return np.logaddexp(0.0, self.w_rho.data)

    def sample_noise(self) -> np.ndarray:
        noise = make_rng(self.noise_seed, self.calls).standard_normal(self.w_mu.shape)
        self.calls += 1
        return noise

    def __call__(self, x: Tensor, noise: Optional[np.ndarray] = None) -> Tensor:
        return vi_linear_forward(x, self, noise)

    def __repr__(self) -> str:
        return f"VILinear({self.in_features} -> {self.out_features})"


def vi_linear_forward(x: Tensor, layer: VILinear, noise: Optional[np.ndarray] = None) -> Tensor:
    """y = x @ (W_mu + E * W_sigma)^T with E fresh per call unless given.

    Raises:
        ShapeError: If x or the noise matrix do not match the weight shape
    """
    if noise is None:
        noise = layer.sample_noise()
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != layer.w_mu.shape:
        raise ShapeError(f"vi_linear: noise shape {noise.shape} does not match weight shape {layer.w_mu.shape}")
    weight = layer.w_mu + Tensor(noise) * layer.w_rho.softplus()
    return linear_forward(x, weight)
