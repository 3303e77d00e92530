"""Architecture schemas for the MLP family."""
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.layers.schema import Activation, NormKind


class NetworkForm(str, Enum):
    """DETERMINISTIC before conversion, ABNN after; VI is the diagnostic baseline."""
    DETERMINISTIC = "deterministic"
    ABNN = "abnn"
    VI = "vi"


class HiddenLayerSpec(BaseModel):
    """One hidden block: linear -> normalization -> activation."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    width: int = Field(..., ge=1, description="Output width of the linear layer")
    norm: Optional[NormKind] = Field(NormKind.BATCH, description="Normalization after the linear layer, or null for none")
    activation: Activation = Field(Activation.RELU, description="Non-linearity after the normalization")


class ArchSpec(BaseModel):
    """MLP architecture: input width, hidden blocks and number of classes."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    input_dim: int = Field(..., ge=1, description="Feature dimension of the inputs")
    hidden: List[HiddenLayerSpec] = Field(default_factory=list, description="Hidden blocks in order")
    num_classes: int = Field(..., ge=2, description="Number of output classes")

    @classmethod
    def mlp(cls, input_dim: int, widths: List[int], num_classes: int, norm: Optional[NormKind] = NormKind.BATCH, activation: Activation = Activation.RELU) -> "ArchSpec":
        """Shorthand for an MLP whose hidden blocks share norm and activation."""
        return cls(
            input_dim=input_dim,
            hidden=[HiddenLayerSpec(width=w, norm=norm, activation=activation) for w in widths],
            num_classes=num_classes,
        )
