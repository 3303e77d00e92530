"""Test configuration for pytest."""
import json
from pathlib import Path

import numpy as np
import pytest
from dotenv import load_dotenv

from src.data import gen_two_moons
from src.model import ArchSpec
from src.layers import NormKind

# Get the project root directory
project_root = Path(__file__).parent.parent

# Load environment variables from .env file
load_dotenv(project_root / '.env')


def small_run_config(**overrides) -> dict:
    """A RunConfig document small enough for CLI and pipeline tests."""
    config = {
        "dataset": {"kind": "two_moons", "n": 160, "noise_std": 0.1, "seed": 0},
        "arch": {
            "input_dim": 2,
            "hidden": [{"width": 8, "norm": "batch", "activation": "relu"}],
            "num_classes": 2,
        },
        "pretrain": {"epochs": 3, "batch_size": 32, "lr": 0.05, "seed": 0},
        "finetune": {"epochs": 1, "batch_size": 32, "lr": 0.01, "seed": 0, "M": 2, "prior_p": 0.5, "alpha": 0.01},
        "ensemble": {"L": 2, "seed": 0},
        "eval": {"ece_bins": 10},
    }
    for section, values in overrides.items():
        if isinstance(values, dict) and isinstance(config.get(section), dict):
            config[section] = {**config[section], **values}
        else:
            config[section] = values
    return config


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def moons():
    """Standardized two-moons dataset with a ring OOD set."""
    return gen_two_moons(200, 0.1, seed=0).standardize()


@pytest.fixture
def tiny_spec():
    return ArchSpec.mlp(2, [8], 2, norm=NormKind.BATCH)


@pytest.fixture
def config_file(tmp_path):
    """Write ``small_run_config`` (with overrides) to a JSON file and return its path."""
    def write(**overrides) -> Path:
        path = tmp_path / "run.json"
        path.write_text(json.dumps(small_run_config(**overrides)))
        return path
    return write


@pytest.fixture
def run_config():
    """Factory for small RunConfig documents, see ``small_run_config``."""
    return small_run_config
