"""Network assembly and the deterministic-to-ABNN conversion."""
import copy
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.autodiff import Tensor
from src.constants import DEFAULT_ALPHA, DEFAULT_VI_SIGMA_INIT
from src.errors import ConversionError, ShapeError
from src.layers import (
    ActivationLayer,
    BayesianNormalization,
    Linear,
    Normalization,
    VILinear,
)
from src.model.schema import ArchSpec, NetworkForm
from src.utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

PARAM_GROUPS = ("linear_weights", "norm_gamma", "norm_beta", "vi_sigma")
NORM_GROUPS = ("norm_gamma", "norm_beta")

Layer = Union[Linear, VILinear, Normalization, BayesianNormalization, ActivationLayer]


class Network:
    """Ordered layers plus named parameter groups and a per-group trainable mask.

    Every parameter belongs to exactly one group:
    ``linear_weights`` (W, or W_mu for VI layers), ``norm_gamma``,
    ``norm_beta`` and ``vi_sigma`` (the softplus-parameterized W_sigma).
    """

    def __init__(
        self,
        spec: ArchSpec,
        layers: List[Layer],
        form: NetworkForm,
        seed: int,
        trainable_mask: Optional[Dict[str, bool]] = None,
    ):
        self.spec = spec
        self.layers = layers
        self.form = NetworkForm(form)
        self.seed = int(seed)
        self.trainable_mask: Dict[str, bool] = {group: True for group in PARAM_GROUPS}
        self.set_trainable(trainable_mask or {})

    # Parameters

    @property
    def param_groups(self) -> Dict[str, List[Tensor]]:
        groups: Dict[str, List[Tensor]] = {group: [] for group in PARAM_GROUPS}
        for layer in self.layers:
            if isinstance(layer, Linear):
                groups["linear_weights"].append(layer.weight)
            elif isinstance(layer, VILinear):
                groups["linear_weights"].append(layer.w_mu)
                groups["vi_sigma"].append(layer.w_rho)
            elif isinstance(layer, Normalization):
                groups["norm_gamma"].append(layer.gamma)
                groups["norm_beta"].append(layer.beta)
        return groups

    def parameters(self, trainable_only: bool = False) -> List[Tuple[str, Tensor]]:
        """(group, tensor) pairs in layer order within each group."""
        return [
            (group, tensor)
            for group, tensors in self.param_groups.items()
            if not trainable_only or self.trainable_mask[group]
            for tensor in tensors
        ]

    def parameter_count(self, trainable_only: bool = False) -> int:
        return sum(tensor.size for _, tensor in self.parameters(trainable_only))

    def set_trainable(self, mask: Dict[str, bool]) -> None:
        """Update the trainable mask and the ``requires_grad`` flag of every parameter."""
        unknown = set(mask) - set(PARAM_GROUPS)
        if unknown:
            raise KeyError(f"Unknown parameter groups: {sorted(unknown)}")
        self.trainable_mask.update({group: bool(flag) for group, flag in mask.items()})
        for group, tensors in self.param_groups.items():
            for tensor in tensors:
                tensor.requires_grad = self.trainable_mask[group]

    def zero_grad(self) -> None:
        for _, tensor in self.parameters():
            tensor.zero_grad()

    # Layers

    @property
    def norm_layers(self) -> List[Normalization]:
        return [layer for layer in self.layers if isinstance(layer, Normalization)]

    @property
    def stochastic_layers(self) -> List[Union[BayesianNormalization, VILinear]]:
        """Layers that draw noise on every forward, in forward order."""
        return [layer for layer in self.layers if isinstance(layer, (BayesianNormalization, VILinear))]

    def noise_shapes(self) -> List[Tuple[int, ...]]:
        return [
            (layer.features,) if isinstance(layer, BayesianNormalization) else layer.w_mu.shape
            for layer in self.stochastic_layers
        ]

    def zero_noise(self) -> List[np.ndarray]:
        """Noise list that switches every stochastic layer off."""
        return [np.zeros(shape) for shape in self.noise_shapes()]

    def sample_noise(self, rng: np.random.Generator) -> List[np.ndarray]:
        """Draw one standard-normal noise array per stochastic layer from ``rng``."""
        return [rng.standard_normal(shape) for shape in self.noise_shapes()]

    def reseed_noise(self, seed: int) -> None:
        """Give every stochastic layer its own stream derived from ``seed``."""
        for index, layer in enumerate(self.stochastic_layers):
            layer.noise_seed = derive_seed(seed, index)
            layer.calls = 0

    # Forward

    def forward(
        self,
        x: Union[Tensor, np.ndarray],
        training: bool = False,
        noise: Optional[Sequence[Optional[np.ndarray]]] = None,
        update_running: bool = True,
    ) -> Tensor:
        """Compute logits.

        Args:
            x: Inputs of shape (batch, input_dim)
            training: Batch statistics (and running-stat updates) for batch norms
            noise: One array per stochastic layer (None entries draw fresh);
                omitted entirely, every stochastic layer draws fresh noise
            update_running: Allow batch norms to update running statistics in training mode

        Returns:
            Logits of shape (batch, num_classes)
        """
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise ShapeError(f"network: input shape {x.shape} does not match input_dim {self.spec.input_dim}")
        stochastic = self.stochastic_layers
        if noise is not None and len(noise) != len(stochastic):
            raise ShapeError(f"network: got {len(noise)} noise arrays for {len(stochastic)} stochastic layers")

        draw = 0
        h = x
        for layer in self.layers:
            if isinstance(layer, BayesianNormalization):
                eps = noise[draw] if noise is not None else None
                draw += 1
                h = layer(h, training=training, update_running=update_running, epsilon=eps)
            elif isinstance(layer, VILinear):
                eps = noise[draw] if noise is not None else None
                draw += 1
                h = layer(h, noise=eps)
            elif isinstance(layer, Normalization):
                h = layer(h, training=training, update_running=update_running)
            else:
                h = layer(h)
        return h

    __call__ = forward

    def predict_proba(self, x: Union[Tensor, np.ndarray], noise: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
        """Softmax probabilities in eval mode."""
        return self.forward(x, training=False, noise=noise).softmax(axis=-1).data

    def clone(self) -> "Network":
        """Fully independent deep copy."""
        return copy.deepcopy(self)

    def __repr__(self) -> str:
        return f"Network(form={self.form.value}, layers={self.layers})"


def _assemble(spec: ArchSpec, seed: int, vi_sigma: Optional[float]) -> List[Layer]:
    rng = make_rng(seed)
    layers: List[Layer] = []
    width_in = spec.input_dim

    def linear(n_in: int, n_out: int, index: int) -> Layer:
        if vi_sigma is None:
            return Linear(n_in, n_out, rng)
        return VILinear(n_in, n_out, rng, sigma_init=vi_sigma, noise_seed=derive_seed(seed, index))

    for index, block in enumerate(spec.hidden):
        layers.append(linear(width_in, block.width, index))
        if block.norm is not None:
            layers.append(Normalization(block.width, block.norm))
        layers.append(ActivationLayer(block.activation))
        width_in = block.width
    layers.append(linear(width_in, spec.num_classes, len(spec.hidden)))
    return layers


def build(spec: ArchSpec, seed: int) -> Network:
    """Deterministic network with He-uniform weights drawn from ``seed``, gamma=1 and beta=0."""
    spec = ArchSpec.model_validate(spec)
    network = Network(spec, _assemble(spec, seed, vi_sigma=None), NetworkForm.DETERMINISTIC, seed)
    logger.debug(f"Built deterministic network with {network.parameter_count()} parameters (seed={seed})")
    return network


def build_vi(spec: ArchSpec, seed: int, sigma_init: float = DEFAULT_VI_SIGMA_INIT) -> Network:
    """VI-BNN with every linear layer replaced by a VILinear.

    W_mu equals the weights ``build(spec, seed)`` would draw, so the two
    networks start from the same point.
    """
    spec = ArchSpec.model_validate(spec)
    return Network(spec, _assemble(spec, seed, vi_sigma=sigma_init), NetworkForm.VI, seed)


def convert_to_abnn(
    network: Network,
    alpha: float = DEFAULT_ALPHA,
    noise_seed: Optional[int] = None,
    train_all: bool = False,
) -> Network:
    """Replace every normalization by a BNL initialized with its values.

    The input network is left untouched. In the result only the
    normalization groups are trainable unless ``train_all`` is set.

    Args:
        network: Deterministic network
        alpha: Noise scale of the new BNL layers
        noise_seed: Base seed of the BNL noise streams (defaults to the network seed)
        train_all: Keep every parameter group trainable

    Raises:
        ConversionError: If the network is not deterministic or has no normalization
    """
    if network.form is not NetworkForm.DETERMINISTIC:
        raise ConversionError(f"Only deterministic networks can be converted, got form {network.form.value}")
    if not network.norm_layers:
        raise ConversionError("ABNN requires normalization layers")

    base_seed = network.seed if noise_seed is None else noise_seed
    layers: List[Layer] = []
    bnl_index = 0
    for layer in copy.deepcopy(network.layers):
        if isinstance(layer, Normalization):
            layer = BayesianNormalization.from_normalization(layer, alpha=alpha, noise_seed=derive_seed(base_seed, bnl_index))
            bnl_index += 1
        layers.append(layer)

    mask = {group: train_all or group in NORM_GROUPS for group in PARAM_GROUPS}
    converted = Network(network.spec, layers, NetworkForm.ABNN, network.seed, trainable_mask=mask)
    logger.info(
        f"Converted {bnl_index} normalization layers to BNL (alpha={alpha}); "
        f"{converted.parameter_count(trainable_only=True)} trainable parameters"
    )
    return converted
