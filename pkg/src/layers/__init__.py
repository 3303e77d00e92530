"""Layers: bias-free linear, activations, normalizations, the BNL and the VI linear baseline."""

from src.layers.schema import Activation, NormKind
from src.layers.linear import Linear, he_uniform, linear_forward
from src.layers.activation import ActivationLayer
from src.layers.norm import BayesianNormalization, Normalization, bnl_forward, norm_forward
from src.layers.vi_linear import VILinear, inverse_softplus, vi_linear_forward

__all__ = [
    'Activation',
    'ActivationLayer',
    'BayesianNormalization',
    'Linear',
    'NormKind',
    'Normalization',
    'VILinear',
    'bnl_forward',
    'he_uniform',
    'inverse_softplus',
    'linear_forward',
    'norm_forward',
    'vi_linear_forward',
]
