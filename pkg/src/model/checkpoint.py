"""Binary checkpoint codec.

Layout (little-endian)::

    b"ABNN" | version: u32 | header_len: u32 | header: JSON (header_len bytes)
    | blob: float64 * n | crc32: u32

The CRC covers every byte before it. The JSON header holds the architecture,
form, seed, trainable mask, per-layer settings, the offset of every parameter
group inside the blob and the training metadata. JSON is written with sorted
keys and compact separators, so save -> load -> save is byte-identical.
"""
import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.constants import CHECKPOINT_MAGIC, CHECKPOINT_VERSION
from src.errors import (
    CheckpointChecksumError,
    CheckpointFormatError,
    CheckpointTruncatedError,
    CheckpointVersionError,
)
from src.layers import BayesianNormalization, Normalization, VILinear
from src.model.network import Network, build, build_vi, convert_to_abnn
from src.model.schema import ArchSpec, NetworkForm

logger = logging.getLogger(__name__)

BLOB_GROUPS = ("linear_weights", "norm_gamma", "norm_beta", "vi_sigma", "norm_running_mean", "norm_running_var")
_HEADER_KEYS = ("spec", "form", "seed", "trainable_mask", "layers", "groups", "metadata")
_PREFIX = struct.Struct("<4sII")
_CRC = struct.Struct("<I")


class TrainingMetadata(BaseModel):
    """What produced the parameters stored in a checkpoint."""
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(0, description="Epochs run")
    lr: float = Field(0.0, description="Base learning rate")
    loss_curve: List[float] = Field(default_factory=list, description="Mean training loss per epoch")
    extra: Dict[str, Any] = Field(default_factory=dict, description="Free-form provenance (prior, mode index, ...)")


class Checkpoint(BaseModel):
    """A network together with its training metadata."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    network: Network
    metadata: TrainingMetadata = Field(default_factory=TrainingMetadata)
    format_version: int = CHECKPOINT_VERSION


def _blob_arrays(network: Network) -> Dict[str, List[np.ndarray]]:
    groups = {name: [t.data for t in tensors] for name, tensors in network.param_groups.items()}
    groups["norm_running_mean"] = [layer.running_mean for layer in network.norm_layers]
    groups["norm_running_var"] = [layer.running_var for layer in network.norm_layers]
    return groups


def _layer_settings(network: Network) -> List[Dict[str, Any]]:
    settings = []
    for layer in network.layers:
        if isinstance(layer, BayesianNormalization):
            settings.append({
                "type": "bnl", "eps_stability": layer.eps_stability, "momentum": layer.momentum,
                "alpha": layer.alpha, "noise_seed": layer.noise_seed, "calls": layer.calls,
            })
        elif isinstance(layer, Normalization):
            settings.append({"type": "norm", "eps_stability": layer.eps_stability, "momentum": layer.momentum})
        elif isinstance(layer, VILinear):
            settings.append({"type": "vi_linear", "noise_seed": layer.noise_seed, "calls": layer.calls})
    return settings


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialize a checkpoint to bytes."""
    network = checkpoint.network
    offsets: Dict[str, List[int]] = {}
    chunks: List[np.ndarray] = []
    cursor = 0
    for name in BLOB_GROUPS:
        arrays = _blob_arrays(network)[name]
        flat = np.concatenate([a.reshape(-1) for a in arrays]) if arrays else np.zeros(0)
        offsets[name] = [cursor, int(flat.size)]
        cursor += int(flat.size)
        chunks.append(flat)
    blob = np.concatenate(chunks).astype("<f8").tobytes()

    header = {
        "spec": network.spec.model_dump(mode="json"),
        "form": network.form.value,
        "seed": network.seed,
        "trainable_mask": network.trainable_mask,
        "layers": _layer_settings(network),
        "groups": offsets,
        "metadata": checkpoint.metadata.model_dump(mode="json"),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = _PREFIX.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(header_bytes)) + header_bytes + blob
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def _skeleton(spec: ArchSpec, form: NetworkForm, seed: int, layer_settings: List[Dict[str, Any]]) -> Network:
    if form is NetworkForm.VI:
        network = build_vi(spec, seed)
    else:
        network = build(spec, seed)
        if form is NetworkForm.ABNN:
            network = convert_to_abnn(network)

    configurable = [layer for layer in network.layers if isinstance(layer, (Normalization, VILinear))]
    if len(configurable) != len(layer_settings):
        raise CheckpointFormatError(f"Header describes {len(layer_settings)} layers, architecture has {len(configurable)}")
    for layer, settings in zip(configurable, layer_settings):
        if isinstance(layer, Normalization):
            layer.eps_stability = settings["eps_stability"]
            layer.momentum = settings["momentum"]
        if isinstance(layer, BayesianNormalization):
            layer.alpha = settings["alpha"]
        if isinstance(layer, (BayesianNormalization, VILinear)):
            layer.noise_seed = settings["noise_seed"]
            layer.calls = settings["calls"]
    return network


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Parse bytes produced by ``encode_checkpoint``.

    Raises:
        CheckpointFormatError: Wrong magic bytes or inconsistent header
        CheckpointVersionError: Unsupported format version
        CheckpointTruncatedError: Fewer bytes than the header announces
        CheckpointChecksumError: CRC32 mismatch
    """
    if len(data) < _PREFIX.size:
        raise CheckpointTruncatedError(f"Checkpoint has {len(data)} bytes, shorter than its fixed prefix")
    magic, version, header_len = _PREFIX.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"Bad magic bytes {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"Unsupported checkpoint version {version} (this build reads {CHECKPOINT_VERSION})")

    header_end = _PREFIX.size + header_len
    if len(data) < header_end + _CRC.size:
        raise CheckpointTruncatedError(f"Checkpoint truncated inside the header ({len(data)} bytes)")
    try:
        header = json.loads(data[_PREFIX.size:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointChecksumError(f"Checkpoint header is corrupt: {str(e)}") from e
    if not isinstance(header, dict):
        raise CheckpointFormatError("Checkpoint header is not a JSON object")
    missing = [key for key in _HEADER_KEYS if key not in header]
    if missing:
        raise CheckpointFormatError(f"Checkpoint header lacks {', '.join(missing)}")
    if any(name not in header["groups"] for name in BLOB_GROUPS):
        raise CheckpointFormatError(f"Checkpoint header must describe groups {', '.join(BLOB_GROUPS)}")

    n_values = sum(length for _, length in header["groups"].values())
    expected = header_end + 8 * n_values + _CRC.size
    if len(data) < expected:
        raise CheckpointTruncatedError(f"Checkpoint truncated: {len(data)} bytes, expected {expected}")
    if len(data) > expected:
        raise CheckpointFormatError(f"Checkpoint has {len(data) - expected} trailing bytes")
    (stored_crc,) = _CRC.unpack_from(data, expected - _CRC.size)
    if zlib.crc32(data[:expected - _CRC.size]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointChecksumError("Checkpoint CRC32 mismatch")

    blob = np.frombuffer(data, dtype="<f8", count=n_values, offset=header_end).astype(np.float64)
    spec = ArchSpec.model_validate(header["spec"])
    network = _skeleton(spec, NetworkForm(header["form"]), header["seed"], header["layers"])

    arrays = _blob_arrays(network)
    for name in BLOB_GROUPS:
        offset, length = header["groups"][name]
        values = blob[offset:offset + length]
        targets = arrays[name]
        if sum(a.size for a in targets) != length:
            raise CheckpointFormatError(f"Group {name} holds {length} values, architecture expects {sum(a.size for a in targets)}")
        cursor = 0
        for target in targets:
            target[...] = values[cursor:cursor + target.size].reshape(target.shape)
            cursor += target.size

    network.set_trainable(header["trainable_mask"])
    metadata = TrainingMetadata.model_validate(header["metadata"])
    return Checkpoint(network=network, metadata=metadata, format_version=version)


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(checkpoint))
    logger.info(f"Saved {checkpoint.network.form.value} checkpoint to {path}")


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())


def save(network: Network, path: Union[str, Path], metadata: Optional[TrainingMetadata] = None) -> None:
    """Write ``network`` (and optional metadata) to ``path``."""
    save_checkpoint(Checkpoint(network=network, metadata=metadata or TrainingMetadata()), path)


def load(path: Union[str, Path]) -> Network:
    """Read the network stored at ``path``."""
    return load_checkpoint(path).network
