"""Longer end-to-end checks on the reference two-moons setup and the gradient-variance setup.

Run with ``pytest -m slow``; deselect with ``-m "not slow"``.
"""
from pathlib import Path

import numpy as np
import pytest

from src.data import write_idx
from src.diagnostics import GradVarKind, StabilityProtocol, gradient_variance_from_config, stability_protocol
from src.ensemble import mutual_information, predict
from src.experiments import ablate, inference_config, load_run_config, parse_run_config, run_pipeline, with_value
from src.metrics import accuracy

CONFIGS = Path(__file__).parent.parent / "configs"
SEEDS = range(5)

pytestmark = pytest.mark.slow


def holds_on(flags, at_least: int) -> bool:
    flags = list(flags)
    return sum(bool(flag) for flag in flags) >= at_least


@pytest.fixture(scope="module")
def reference():
    return load_run_config(CONFIGS / "two_moons.json")


@pytest.fixture(scope="module")
def runs(reference):
    """One full pipeline per seed: (config, PipelineResult)."""
    return [(reference.with_seed(seed), run_pipeline(reference.with_seed(seed))) for seed in SEEDS]


class TestReferencePipeline:
    def test_pretrained_network_fits_two_moons(self, runs):
        for _, result in runs:
            assert result.single.acc > 0.95

    def test_abnn_keeps_accuracy(self, runs):
        for _, result in runs:
            assert result.abnn.acc >= result.single.acc - 0.02

    def test_abnn_calibration_no_worse(self, runs):
        assert holds_on((result.abnn.ece <= result.single.ece for _, result in runs), 4), [
            (result.abnn.ece, result.single.ece) for _, result in runs
        ]

    def test_abnn_fpr95_no_worse(self, runs):
        assert holds_on((result.abnn.fpr95 <= result.single.fpr95 for _, result in runs), 4), [
            (result.abnn.fpr95, result.single.fpr95) for _, result in runs
        ]

    def test_mutual_information_higher_out_of_distribution(self, runs):
        assert holds_on((result.abnn.mi_ood_mean > result.abnn.mi_id_mean for _, result in runs), 4), [
            (result.abnn.mi_ood_mean, result.abnn.mi_id_mean) for _, result in runs
        ]

    def test_epistemic_uncertainty_only_for_abnn(self, runs):
        config, result = runs[0]
        bundle = predict(result.modes, result.dataset.test.x, inference_config(config, result.modes))
        assert np.mean(mutual_information(bundle).epistemic) > 0.0
        assert result.single.mi_id_mean == 0.0
        assert accuracy(bundle.mean_probs, result.dataset.test.y) == result.abnn.acc

    def test_modes_share_the_checkpoint_weights(self, runs):
        _, result = runs[0]
        frozen = result.checkpoint.network.param_groups["linear_weights"]
        for mode in result.modes.modes:
            for a, b in zip(mode.param_groups["linear_weights"], frozen):
                assert np.array_equal(a.data, b.data)


class TestAblation:
    def test_multi_mode_fpr95_no_worse(self, reference):
        flags, cells = [], []
        for seed in SEEDS:
            rows = ablate(reference.with_seed(seed))
            on = np.mean([float(row["fpr95"]) for row in rows if row["MM"] == "1"])
            off = np.mean([float(row["fpr95"]) for row in rows if row["MM"] == "0"])
            flags.append(on <= off)
            cells.append((on, off))
        assert holds_on(flags, 4), cells


class TestStability:
    def test_one_checkpoint_spreads_less_than_many(self, reference):
        # Overlapping moons keep the accuracy spread away from zero
        config = with_value(reference, "dataset.noise_std", 0.25)
        one = stability_protocol(StabilityProtocol.ONE_CKPT_MULTI_ABNN, 5, config)
        multi = stability_protocol(StabilityProtocol.MULTI_CKPT_ABNN, 5, config)
        assert multi.std["acc"] > 0.0
        assert one.std["acc"] <= multi.std["acc"], (one.std, multi.std)


@pytest.fixture(scope="module")
def idx_config(tmp_path_factory):
    """784-feature, 10-class IDX files (noisy class prototypes) and a 784-[256 BN]-[256 BN]-10 config."""
    root = tmp_path_factory.mktemp("idx")
    rng = np.random.default_rng(0)
    prototypes = rng.integers(0, 256, size=(10, 28, 28)).astype(np.float64)

    def write_split(name: str, n: int) -> None:
        labels = rng.integers(0, 10, size=n)
        images = np.clip(0.6 * prototypes[labels] + rng.normal(50.0, 40.0, size=(n, 28, 28)), 0, 255).round()
        write_idx(root / f"{name}-images", images.astype(np.uint8))
        write_idx(root / f"{name}-labels", labels.astype(np.uint8))

    write_split("train", 2048)
    write_split("test", 256)
    hidden = [{"width": 256, "norm": "batch", "activation": "relu"}] * 2
    return parse_run_config({
        "dataset": {
            "kind": "idx",
            "train_images": str(root / "train-images"),
            "train_labels": str(root / "train-labels"),
            "test_images": str(root / "test-images"),
            "test_labels": str(root / "test-labels"),
            "num_classes": 10,
            "subset": 2048,
            "seed": 0,
        },
        "arch": {"input_dim": 784, "hidden": hidden, "num_classes": 10},
        "pretrain": {"epochs": 3, "batch_size": 128, "lr": 0.05, "momentum": 0.9, "weight_decay": 0.0005, "seed": 0},
        "finetune": {"epochs": 1, "batch_size": 128, "lr": 0.005, "seed": 0, "M": 1, "prior_p": 0.5, "alpha": 0.01},
        "ensemble": {"L": 1, "seed": 0},
        "eval": {"ece_bins": 15},
        "gradvar": {"n_steps": 20, "batch_size": 128, "alpha": 0.01, "sigma_init": 0.001, "seed": 0},
    })


class TestGradientVarianceOrdering:
    def test_post_hoc_abnn_below_vi(self, idx_config):
        results = []
        for seed in SEEDS:
            reports = gradient_variance_from_config(idx_config.with_seed(seed), kinds=[GradVarKind.ABNN, GradVarKind.VI])
            assert reports[GradVarKind.ABNN].from_pretrained
            results.append((reports[GradVarKind.ABNN].variance, reports[GradVarKind.VI].variance))
        assert all(abnn < vi for abnn, vi in results), results
