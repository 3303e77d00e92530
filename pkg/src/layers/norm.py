"""Deterministic normalization layers and the Bayesian normalization layer.

Both layer types share one arithmetic path: standardize, then scale and
shift. The BNL only changes the scale, from ``gamma`` to
``gamma * (1 + alpha * eps)``, so at ``eps = 0`` or ``alpha = 0`` it produces
bit-identical outputs to the normalization it replaced.
"""
import logging
from typing import Optional

import numpy as np

from src.autodiff import Tensor
from src.constants import DEFAULT_ALPHA, DEFAULT_EPS_STABILITY, DEFAULT_NORM_MOMENTUM
from src.errors import BatchTooSmallError, ShapeError
from src.layers.schema import NormKind
from src.utils.seeding import make_rng

logger = logging.getLogger(__name__)


class Normalization:
    """Batch, layer or instance normalization with learnable gamma and beta.

    Args:
        features: Width of the normalized activations
        kind: Which axis the statistics are computed over
        eps_stability: Added to the variance under the square root (>= 0)
        momentum: EMA factor of the running statistics, in (0, 1)
    """

    def __init__(
        self,
        features: int,
        kind: NormKind = NormKind.BATCH,
        eps_stability: float = DEFAULT_EPS_STABILITY,
        momentum: float = DEFAULT_NORM_MOMENTUM,
    ):
        if features < 1:
            raise ShapeError(f"Normalization needs at least one feature, got {features}")
        if eps_stability < 0:
            raise ValueError(f"eps_stability must be non-negative, got {eps_stability}")
        if not 0.0 < momentum < 1.0:
            raise ValueError(f"momentum must lie in (0, 1), got {momentum}")
        self.kind = NormKind(kind)
        self.eps_stability = float(eps_stability)
        self.momentum = float(momentum)
        self.gamma = Tensor(np.ones(features), requires_grad=True, name="gamma")
        self.beta = Tensor(np.zeros(features), requires_grad=True, name="beta")
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)

    @property
    def features(self) -> int:
        return self.gamma.shape[0]

    def __call__(self, x: Tensor, training: bool = False, update_running: bool = True) -> Tensor:
        return norm_forward(x, self, training=training, update_running=update_running)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(features={self.features}, kind={self.kind.value})"


class BayesianNormalization(Normalization):
    """Normalization whose scale is perturbed by fresh Gaussian noise.

    One noise vector of length ``features`` is drawn per forward call and
    shared by every sample of the batch. The draw for call k is a pure
    function of (noise_seed, k), so a run can be replayed.
    """

    def __init__(
        self,
        features: int,
        kind: NormKind = NormKind.BATCH,
        alpha: float = DEFAULT_ALPHA,
        noise_seed: int = 0,
        eps_stability: float = DEFAULT_EPS_STABILITY,
        momentum: float = DEFAULT_NORM_MOMENTUM,
    ):
        super().__init__(features, kind, eps_stability, momentum)
        if not np.isfinite(alpha) or alpha < 0:
            raise ValueError(f"alpha must be finite and non-negative, got {alpha}")
        self.alpha = float(alpha)
        self.noise_seed = int(noise_seed)
        self.calls = 0

    @classmethod
    def from_normalization(cls, norm: Normalization, alpha: float = DEFAULT_ALPHA, noise_seed: int = 0) -> "BayesianNormalization":
        """Build a BNL carrying over gamma, beta and running statistics of ``norm``."""
        layer = cls(norm.features, norm.kind, alpha, noise_seed, norm.eps_stability, norm.momentum)
        layer.gamma = Tensor(norm.gamma.data, requires_grad=norm.gamma.requires_grad, name="gamma")
        layer.beta = Tensor(norm.beta.data, requires_grad=norm.beta.requires_grad, name="beta")
        layer.running_mean = norm.running_mean.copy()
        layer.running_var = norm.running_var.copy()
        return layer

    def sample_epsilon(self) -> np.ndarray:
        """Draw the noise vector for the next call and advance the call index."""
        epsilon = make_rng(self.noise_seed, self.calls).standard_normal(self.features)
        self.calls += 1
        return epsilon

    def __call__(
        self,
        x: Tensor,
        training: bool = False,
        update_running: bool = True,
        epsilon: Optional[np.ndarray] = None,
    ) -> Tensor:
        return bnl_forward(x, self, epsilon=epsilon, training=training, update_running=update_running)

    def __repr__(self) -> str:
        return f"BayesianNormalization(features={self.features}, kind={self.kind.value}, alpha={self.alpha})"


def _standardize(x: Tensor, layer: Normalization, training: bool, update_running: bool) -> Tensor:
    if x.ndim != 2 or x.shape[1] != layer.features:
        raise ShapeError(f"norm: input shape {x.shape} does not match {layer.features} features")

    if layer.kind is NormKind.BATCH:
        if training:
            if x.shape[0] < 2:
                raise BatchTooSmallError("batch too small for batch statistics")
            mean = x.mean(axis=0, keepdims=True)
            var = x.var(axis=0, keepdims=True)
            if update_running:
                m = layer.momentum
                layer.running_mean = (1.0 - m) * layer.running_mean + m * mean.data[0]
                layer.running_var = (1.0 - m) * layer.running_var + m * var.data[0]
        else:
            mean = Tensor(layer.running_mean)
            var = Tensor(layer.running_var)
    else:
        # Per-sample statistics; identical in train and eval mode
        mean = x.mean(axis=1, keepdims=True)
        var = x.var(axis=1, keepdims=True)

    return (x - mean) / (var + layer.eps_stability).sqrt()


def _scale_shift(standardized: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    return standardized * scale + shift


def norm_forward(x: Tensor, layer: Normalization, training: bool = False, update_running: bool = True) -> Tensor:
    """y = (x - mu) / sigma * gamma + beta with statistics chosen by ``layer.kind``.

    Raises:
        ShapeError: If x is not (batch, features)
        BatchTooSmallError: On a batch of one with batch statistics
    """
    return _scale_shift(_standardize(x, layer, training, update_running), layer.gamma, layer.beta)


def bnl_forward(
    x: Tensor,
    layer: BayesianNormalization,
    epsilon: Optional[np.ndarray] = None,
    training: bool = False,
    update_running: bool = True,
) -> Tensor:
    """y = (x - mu) / sigma * gamma * (1 + alpha * eps) + beta.

    ``epsilon`` is a constant for differentiation; gradients reach gamma and
    beta only. When omitted it is drawn from the layer's seeded stream.
    """
    if epsilon is None:
        epsilon = layer.sample_epsilon()
    epsilon = np.asarray(epsilon, dtype=np.float64)
    if epsilon.shape != (layer.features,):
        raise ShapeError(f"bnl: epsilon shape {epsilon.shape} does not match {layer.features} features")
    factor = Tensor(1.0 + layer.alpha * epsilon)
    return _scale_shift(_standardize(x, layer, training, update_running), layer.gamma * factor, layer.beta)
