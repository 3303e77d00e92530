"""JSON run configuration.

A RunConfig is validated in full before any work starts. Unknown keys are
rejected, and validation errors are reported with a JSON pointer to the
offending value.
"""
import json
import logging
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError

from src.constants import DEFAULT_ALPHA, DEFAULT_ECE_BINS, DEFAULT_TEST_FRACTION, DEFAULT_VI_SIGMA_INIT
from src.ensemble import EnsembleConfig
from src.errors import ConfigError
from src.model import ArchSpec
from src.train import FinetuneConfig, TrainConfig

logger = logging.getLogger(__name__)


class TwoMoonsDataset(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["two_moons"] = "two_moons"
    n: int = Field(2000, ge=4)
    noise_std: float = Field(0.1, ge=0)
    seed: int = Field(0, ge=0)
    test_fraction: float = Field(DEFAULT_TEST_FRACTION, gt=0, lt=1)
    n_ood: Optional[int] = Field(None, ge=1)


class BlobsDataset(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["blobs"] = "blobs"
    k: int = Field(3, ge=2)
    n: int = Field(1500, ge=4)
    spread: float = Field(0.5, ge=0)
    seed: int = Field(0, ge=0)
    test_fraction: float = Field(DEFAULT_TEST_FRACTION, gt=0, lt=1)
    n_ood: Optional[int] = Field(None, ge=1)


class IdxDataset(BaseModel):
    """MNIST-style IDX files; paths are relative to the config file."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["idx"] = "idx"
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str
    num_classes: Optional[int] = Field(None, ge=2)
    held_classes: List[int] = Field(default_factory=list, description="Classes moved to the OOD set")
    subset: Optional[int] = Field(None, ge=2, description="Seeded random subset of the train split, drawn before holdout")
    seed: int = Field(0, ge=0)


DatasetConfig = Annotated[Union[TwoMoonsDataset, BlobsDataset, IdxDataset], Field(discriminator="kind")]


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ece_bins: int = Field(DEFAULT_ECE_BINS, ge=1)


class GradVarConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_steps: int = Field(50, ge=1)
    batch_size: int = Field(128, ge=2)
    alpha: float = Field(DEFAULT_ALPHA, ge=0)
    sigma_init: float = Field(DEFAULT_VI_SIGMA_INIT, ge=0)
    along_trajectory: bool = False
    lr: float = Field(0.0, ge=0)
    seed: int = Field(0, ge=0)
    from_pretrained: bool = Field(True, description="Measure the abnn on the pretrained checkpoint rather than at initialization")


class RunConfig(BaseModel):
    """Everything one experiment needs, section by section."""
    model_config = ConfigDict(extra="forbid")

    dataset: DatasetConfig
    arch: ArchSpec
    pretrain: TrainConfig
    finetune: FinetuneConfig
    ensemble: EnsembleConfig = Field(default_factory=EnsembleConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    gradvar: Optional[GradVarConfig] = None
    _base_dir: Optional[str] = PrivateAttr(None)

    def with_seed(self, seed: int) -> "RunConfig":
        """Copy with every seed replaced by ``seed``."""
        data = self.model_dump(mode="json")
        for section in ("dataset", "pretrain", "finetune", "ensemble"):
            data[section]["seed"] = seed
        if data.get("gradvar") is not None:
            data["gradvar"]["seed"] = seed
        config = RunConfig.model_validate(data)
        config._base_dir = self._base_dir
        return config

    def resolve(self, path: str) -> Path:
        candidate = Path(path)
        if candidate.is_absolute() or self._base_dir is None:
            return candidate
        return Path(self._base_dir) / candidate


def json_pointer(loc: tuple) -> str:
    """Pydantic error location -> RFC 6901 JSON pointer, dropping union-tag segments."""
    parts = []
    for segment in loc:
        if isinstance(segment, str) and segment in ("two_moons", "blobs", "idx"):
            continue
        parts.append(str(segment).replace("~", "~0").replace("/", "~1"))
    return "/" + "/".join(parts) if parts else ""


def parse_run_config(data: Any, base_dir: Optional[Union[str, Path]] = None) -> RunConfig:
    """Validate a decoded JSON document.

    Raises:
        ConfigError: On the first validation error, carrying its JSON pointer
    """
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        pointer = json_pointer(tuple(first["loc"]))
        raise ConfigError(f"{pointer or '/'}: {first['msg']}", pointer=pointer) from e
    config._base_dir = str(base_dir) if base_dir is not None else None
    return config


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a RunConfig JSON file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config is not valid JSON: {e.msg} at line {e.lineno}") from e
    config = parse_run_config(data, base_dir=path.parent)
    logger.debug(f"Loaded run config from {path}")
    return config
