"""Tests for run configs and the experiment pipelines."""

import csv
import json

import numpy as np
import pytest

from src.constants import LR_SWEEP_MULTIPLIERS
from src.data import write_idx
from src.errors import ConfigError
from src.experiments import (
    ABLATION_GRID,
    RunConfig,
    ablate,
    build_dataset,
    evaluate_single,
    inference_config,
    load_run_config,
    parse_run_config,
    run_deep_ensemble,
    run_pipeline,
    run_pretrain,
    sweep,
    with_value,
    write_rows,
)
from src.metrics import CSV_FIELDS
from src.train import ModeSet


class TestRunConfig:
    """Validation with JSON pointers."""

    def test_valid(self, run_config):
        config = parse_run_config(run_config())
        assert isinstance(config, RunConfig)
        assert config.finetune.M == 2 and config.ensemble.L == 2

    @pytest.mark.parametrize("overrides, pointer", [
        ({"finetune": {"bogus": 1}}, "/finetune/bogus"),
        ({"pretrain": {"lr": -1.0}}, "/pretrain/lr"),
        ({"dataset": {"n": 2}}, "/dataset/n"),
        ({"arch": {"num_classes": 1}}, "/arch/num_classes"),
        ({"ensemble": {"L": 0}}, "/ensemble/L"),
    ])
    def test_pointer(self, run_config, overrides, pointer):
        with pytest.raises(ConfigError) as info:
            parse_run_config(run_config(**overrides))
        assert info.value.pointer == pointer

    def test_unknown_section(self, run_config):
        with pytest.raises(ConfigError) as info:
            parse_run_config({**run_config(), "extra": {}})
        assert info.value.pointer == "/extra"

    def test_load_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(ConfigError):
            load_run_config(broken)

    def test_with_seed(self, run_config):
        config = parse_run_config(run_config()).with_seed(9)
        assert {config.dataset.seed, config.pretrain.seed, config.finetune.seed, config.ensemble.seed} == {9}

    def test_with_value(self, run_config):
        config = parse_run_config(run_config())
        updated = with_value(config, "finetune.lr", 0.5)
        assert updated.finetune.lr == 0.5 and config.finetune.lr == 0.01
        with pytest.raises(ConfigError) as info:
            with_value(config, "finetune.nope", 1)
        assert info.value.pointer == "/finetune/nope"
        with pytest.raises(ConfigError) as info:
            with_value(config, "finetune.prior_p", 2.0)
        assert info.value.pointer == "/finetune/prior_p"


class TestBuildDataset:
    def test_two_moons(self, run_config):
        dataset = build_dataset(parse_run_config(run_config()))
        assert (dataset.train.n, dataset.test.n, dataset.ood.shape[0]) == (120, 40, 40)
        assert dataset.standardized
        assert not build_dataset(parse_run_config(run_config()), standardize=False).standardized

    def test_blobs(self, run_config):
        data = run_config(arch={"num_classes": 3})
        data["dataset"] = {"kind": "blobs", "k": 3, "n": 90, "spread": 0.3, "seed": 0}
        config = parse_run_config(data)
        assert build_dataset(config).num_classes == 3

    def test_idx_paths_relative_to_config(self, run_config, tmp_path):
        rng = np.random.default_rng(0)
        for split, n in (("train", 60), ("test", 30)):
            write_idx(tmp_path / "data" / f"{split}-images", rng.integers(0, 256, size=(n, 2, 2)))
            write_idx(tmp_path / "data" / f"{split}-labels", np.arange(n) % 3)
        dataset_section = {
            "kind": "idx",
            "train_images": "data/train-images",
            "train_labels": "data/train-labels",
            "test_images": "data/test-images",
            "test_labels": "data/test-labels",
            "held_classes": [2],
            "subset": 30,
        }
        path = tmp_path / "idx.json"
        data = run_config(arch={"input_dim": 4})
        data["dataset"] = dataset_section
        path.write_text(json.dumps(data))
        dataset = build_dataset(load_run_config(path))
        assert dataset.num_classes == 2
        assert dataset.ood.shape == (10, 4)
        assert dataset.train.n <= 30 and set(np.unique(dataset.train.y).tolist()) <= {0, 1}

    def test_arch_mismatch(self, run_config):
        config = parse_run_config(run_config(arch={"input_dim": 3}))
        with pytest.raises(ConfigError) as info:
            run_pretrain(config)
        assert info.value.pointer == "/arch/input_dim"


class TestPipeline:
    """End-to-end runs."""

    @pytest.fixture
    def config(self, run_config):
        return parse_run_config(run_config())

    def test_pipeline(self, config):
        result = run_pipeline(config)
        assert result.modes.M == 2
        assert result.abnn.n_id == 40 and result.abnn.n_ood == 40
        assert result.abnn.config["form"] == "abnn" and result.abnn.config["L"] == 2
        assert result.single.config["L"] == 1 and result.single.mi_id_mean == 0.0

    def test_reproducible(self, config):
        first, second = run_pipeline(config), run_pipeline(config)
        assert first.abnn.to_json() == second.abnn.to_json()
        assert first.single.to_json() == second.single.to_json()

    def test_reusing_a_checkpoint(self, config):
        ckpt = run_pretrain(config)
        assert run_pipeline(config, ckpt=ckpt).checkpoint is ckpt

    def test_inference_config(self, config):
        ckpt = run_pretrain(config)
        assert inference_config(config, ModeSet.single(ckpt.network)).L == 1
        assert evaluate_single(config, ckpt).config["form"] == "deterministic"

    def test_deep_ensemble(self, config):
        ensemble = run_deep_ensemble(config)
        assert ensemble.M == config.finetune.M


class TestSweepAndAblation:
    @pytest.fixture
    def config(self, run_config):
        return parse_run_config(run_config())

    def test_default_lr_sweep(self, config):
        rows = sweep(config)
        assert len(rows) == len(LR_SWEEP_MULTIPLIERS) == 7
        assert [row["value"] for row in rows] == [repr(m) for m in LR_SWEEP_MULTIPLIERS]
        assert all(row["param"] == "finetune.lr" for row in rows)
        assert all(set(CSV_FIELDS) <= set(row) for row in rows)

    def test_explicit_values(self, config):
        rows = sweep(config, "finetune.alpha", [0.0, 0.1])
        assert [row["value"] for row in rows] == ["0.0", "0.1"]

    def test_pretrain_param(self, config):
        rows = sweep(config, "pretrain.epochs", [1, 2])
        assert len(rows) == 2

    def test_no_default_values(self, config):
        with pytest.raises(ConfigError):
            sweep(config, "finetune.alpha")

    def test_reproducible_sweep(self, config):
        assert sweep(config, "finetune.M", [1, 2]) == sweep(config, "finetune.M", [1, 2])

    def test_ablation_grid(self, config):
        rows = ablate(config)
        assert [(row["RP"], row["MM"]) for row in rows] == [(str(rp), str(mm)) for rp, mm in ABLATION_GRID]

    def test_write_rows(self, config, tmp_path):
        rows = sweep(config, "finetune.alpha", [0.0])
        path = tmp_path / "out" / "sweep.csv"
        write_rows(rows, path, leading=["param", "value"])
        with path.open() as f:
            reader = csv.DictReader(f)
            assert reader.fieldnames == ["param", "value"] + CSV_FIELDS
            assert len(list(reader)) == 1
