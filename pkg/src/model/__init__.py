"""Network assembly, ABNN conversion and the checkpoint codec."""

from src.model.schema import ArchSpec, HiddenLayerSpec, NetworkForm
from src.model.network import NORM_GROUPS, PARAM_GROUPS, Network, build, build_vi, convert_to_abnn
from src.model.checkpoint import (
    Checkpoint,
    TrainingMetadata,
    decode_checkpoint,
    encode_checkpoint,
    load,
    load_checkpoint,
    save,
    save_checkpoint,
)

__all__ = [
    'ArchSpec',
    'Checkpoint',
    'HiddenLayerSpec',
    'NORM_GROUPS',
    'Network',
    'NetworkForm',
    'PARAM_GROUPS',
    'TrainingMetadata',
    'build',
    'build_vi',
    'convert_to_abnn',
    'decode_checkpoint',
    'encode_checkpoint',
    'load',
    'load_checkpoint',
    'save',
    'save_checkpoint',
]
