"""ModeSet: the M fine-tuned parameter sets averaged at inference."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

from src.constants import CHECKPOINT_SUFFIX, MODESET_MANIFEST
from src.errors import ModeSetError
from src.model import ArchSpec, Checkpoint, Network, NetworkForm, TrainingMetadata, load_checkpoint, save_checkpoint
from src.train.schema import RandomPrior

logger = logging.getLogger(__name__)


@dataclass
class ModeSet:
    """Networks sharing one architecture plus the prior each was tuned with.

    ABNN mode sets come out of ``finetune_abnn``; deep-ensemble baselines
    are mode sets of deterministic networks.
    """
    modes: List[Network]
    priors: List[RandomPrior]
    metadata: List[TrainingMetadata] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.modes:
            raise ModeSetError("ModeSet must hold at least one mode")
        if len(self.priors) != len(self.modes):
            raise ModeSetError(f"{len(self.modes)} modes but {len(self.priors)} priors")
        if self.metadata and len(self.metadata) != len(self.modes):
            raise ModeSetError(f"{len(self.modes)} modes but {len(self.metadata)} metadata entries")
        spec, form = self.modes[0].spec, self.modes[0].form
        for index, mode in enumerate(self.modes):
            if mode.spec != spec:
                raise ModeSetError(f"Mode {index} has a different architecture")
            if mode.form is not form:
                raise ModeSetError(f"Mode {index} has form {mode.form.value}, expected {form.value}")

    @property
    def M(self) -> int:
        return len(self.modes)

    @property
    def spec(self) -> ArchSpec:
        return self.modes[0].spec

    @property
    def form(self) -> NetworkForm:
        return self.modes[0].form

    def __len__(self) -> int:
        return len(self.modes)

    @classmethod
    def single(cls, network: Network) -> "ModeSet":
        """Wrap one network (single-model baseline)."""
        return cls(modes=[network], priors=[RandomPrior.off(network.spec.num_classes)])


def save_modeset(modeset: ModeSet, directory: Union[str, Path]) -> None:
    """Write ``mode_<i>.abnn`` per mode and a ``modeset.json`` manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for index, mode in enumerate(modeset.modes):
        name = f"mode_{index}{CHECKPOINT_SUFFIX}"
        metadata = modeset.metadata[index] if modeset.metadata else TrainingMetadata()
        save_checkpoint(Checkpoint(network=mode, metadata=metadata), directory / name)
        files.append(name)
    manifest = {
        "form": modeset.form.value,
        "modes": files,
        "priors": [prior.model_dump() for prior in modeset.priors],
        "config": modeset.config,
    }
    (directory / MODESET_MANIFEST).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    logger.info(f"Saved ModeSet with {modeset.M} modes to {directory}")


def load_modeset(directory: Union[str, Path]) -> ModeSet:
    """Read a directory written by ``save_modeset``.

    Raises:
        ModeSetError: If the manifest is missing or inconsistent
    """
    directory = Path(directory)
    manifest_path = directory / MODESET_MANIFEST
    if not manifest_path.is_file():
        raise ModeSetError(f"No {MODESET_MANIFEST} in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as e:
        raise ModeSetError(f"Unreadable manifest {manifest_path}: {str(e)}") from e

    checkpoints = [load_checkpoint(directory / name) for name in manifest.get("modes", [])]
    return ModeSet(
        modes=[ckpt.network for ckpt in checkpoints],
        priors=[RandomPrior.model_validate(prior) for prior in manifest.get("priors", [])],
        metadata=[ckpt.metadata for ckpt in checkpoints],
        config=manifest.get("config", {}),
    )


def parameter_distance(a: Network, b: Network, trainable_only: bool = False) -> float:
    """L2 distance between the flattened parameters of two networks of one architecture."""
    total = 0.0
    for (_, ta), (_, tb) in zip(a.parameters(trainable_only), b.parameters(trainable_only)):
        total += float(((ta.data - tb.data) ** 2).sum())
    return total ** 0.5
