from src.autodiff import Tensor
from src.layers.schema import Activation


class ActivationLayer:
    """Elementwise non-linearity (relu, gelu or tanh)."""

    def __init__(self, kind: Activation = Activation.RELU):
        self.kind = Activation(kind)

    def __call__(self, x: Tensor) -> Tensor:
        if self.kind is Activation.RELU:
            return x.relu()
        if self.kind is Activation.GELU:
            return x.gelu()
        return x.tanh()

    def __repr__(self) -> str:
        return f"ActivationLayer({self.kind.value})"
