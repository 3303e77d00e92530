"""Layer kind enumerations.

The values double as the spelling used in JSON configs and checkpoint headers.
"""
from enum import Enum


class NormKind(str, Enum):
    """Normalization flavour.

    BATCH reduces over the batch axis per feature, LAYER over the feature axis
    per sample. INSTANCE reduces over spatial positions per sample and channel;
    on the 2-D activations of an MLP that is the feature axis, so it behaves
    exactly like LAYER here.
    """
    BATCH = "batch"
    LAYER = "layer"
    INSTANCE = "instance"


class Activation(str, Enum):
    RELU = "relu"
    GELU = "gelu"
    TANH = "tanh"
