"""Tests for losses, the optimizer, pre-training and ABNN fine-tuning."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.autodiff import Graph, Tensor, finite_diff_check
from src.errors import ConversionError, DivergenceError, LabelError, MissingGradientError, ModeSetError
from src.layers import Activation, NormKind
from src.metrics import accuracy
from src.model import ArchSpec, Checkpoint, NetworkForm, build, convert_to_abnn
from src.train import (
    SGD,
    DivergenceGuard,
    FinetuneConfig,
    ModeSet,
    RandomPrior,
    TrainConfig,
    finetune_abnn,
    iter_batches,
    learning_rate,
    load_modeset,
    map_loss,
    objective_from_logits,
    parameter_distance,
    per_sample_cross_entropy,
    pretrain,
    pretrain_ensemble,
    random_prior_loss,
    save_modeset,
    sgd_step,
    total_loss,
)


def finetune_config(**overrides) -> FinetuneConfig:
    values = {"epochs": 1, "batch_size": 32, "lr": 0.01, "seed": 0, "M": 2, "prior_p": 0.5, "alpha": 0.01}
    values.update(overrides)
    return FinetuneConfig(**values)


class TestLosses:
    """Cross-entropy and the random-prior objective."""

    def test_confident_correct_is_zero(self):
        loss = per_sample_cross_entropy(Tensor([[50.0, -50.0]]), np.array([0])).mean()
        assert 0.0 <= loss.item() <= 1e-12

    def test_uniform_is_log_c(self):
        loss = per_sample_cross_entropy(Tensor(np.zeros((4, 5))), np.array([0, 1, 2, 3])).mean()
        assert loss.item() == pytest.approx(math.log(5), abs=1e-12)

    def test_closed_form(self):
        loss = per_sample_cross_entropy(Tensor([[2.0, 0.0]]), np.array([0])).item()
        assert loss == pytest.approx(-math.log(math.exp(2) / (math.exp(2) + 1)), abs=1e-12)
        assert loss == pytest.approx(0.126928, abs=1e-6)

    def test_eta_zero_reduces_to_map(self, rng):
        logits = Tensor(rng.normal(size=(6, 3)))
        labels = rng.integers(0, 3, size=6)
        terms = objective_from_logits(logits, labels, RandomPrior.off(3))
        assert terms.prior.item() == 0.0
        assert terms.total.item() == terms.map.item()

    def test_eta_one_doubles(self, rng):
        logits = Tensor(rng.normal(size=(6, 3)))
        labels = rng.integers(0, 3, size=6)
        terms = objective_from_logits(logits, labels, RandomPrior(eta=[1, 1, 1], bernoulli_p=1.0, seed=0))
        assert terms.total.item() == 2.0 * terms.map.item()

    def test_mixed_eta_by_hand(self):
        logits = Tensor([[1.0, -1.0], [0.5, 2.0]])
        labels = np.array([0, 1])
        a, b = per_sample_cross_entropy(logits, labels).data
        terms = objective_from_logits(logits, labels, RandomPrior(eta=[1, 0], bernoulli_p=0.5, seed=0))
        assert terms.total.item() == pytest.approx((2 * a + b) / 2, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_weighted_cross_entropy_identity(self, seed):
        rng = np.random.default_rng(seed)
        logits = Tensor(rng.normal(size=(8, 4)))
        labels = rng.integers(0, 4, size=8)
        prior = RandomPrior.sample(4, 0.5, seed)
        terms = objective_from_logits(logits, labels, prior)
        ce = per_sample_cross_entropy(logits, labels).data
        expected = np.mean((1.0 + prior.weights[labels]) * ce)
        assert abs(terms.total.item() - (terms.map.item() + terms.prior.item())) == 0.0
        assert abs(terms.total.item() - expected) < 1e-12

    def test_network_losses_share_one_forward(self, tiny_spec, rng):
        network = convert_to_abnn(build(tiny_spec, seed=0))
        batch = (rng.normal(size=(6, 2)), rng.integers(0, 2, size=6))
        noise = network.zero_noise()
        prior = RandomPrior(eta=[1, 0], bernoulli_p=0.5, seed=0)
        terms = total_loss(network, batch, prior, training=False, noise=noise)
        assert terms.map.item() == map_loss(network, batch, training=False, noise=noise).item()
        assert terms.prior.item() == random_prior_loss(network, batch, prior, training=False, noise=noise).item()

    def test_label_out_of_range(self, tiny_spec, rng):
        network = build(tiny_spec, seed=0)
        with pytest.raises(LabelError):
            map_loss(network, (rng.normal(size=(3, 2)), np.array([0, 1, 2])))


class TestRandomPrior:
    """Per-class Bernoulli weights."""

    def test_sample_is_deterministic(self):
        assert RandomPrior.sample(10, 0.5, 7) == RandomPrior.sample(10, 0.5, 7)

    def test_extreme_probabilities(self):
        assert RandomPrior.sample(5, 0.0, 1).eta == [0] * 5
        assert RandomPrior.sample(5, 1.0, 1).eta == [1] * 5

    def test_rejects_non_binary(self):
        with pytest.raises(ValidationError):
            RandomPrior(eta=[0, 2], bernoulli_p=0.5, seed=0)


class TestOptimizer:
    """SGD update rule, masks and the milestone schedule."""

    def test_plain_gradient_descent(self):
        network = build(ArchSpec(input_dim=1, hidden=[], num_classes=2), seed=0)
        weight = network.param_groups["linear_weights"][0]
        weight.data = np.ones_like(weight.data)
        weight.grad = np.full_like(weight.data, 2.0)
        SGD(network, TrainConfig(epochs=1, batch_size=2, lr=0.1, momentum=0.0)).step(epoch=0)
        np.testing.assert_allclose(weight.data, 0.8)

    def test_momentum_and_weight_decay(self):
        network = build(ArchSpec(input_dim=1, hidden=[], num_classes=2), seed=0)
        weight = network.param_groups["linear_weights"][0]
        weight.data = np.ones_like(weight.data)
        optimizer = SGD(network, TrainConfig(epochs=1, batch_size=2, lr=0.1, momentum=0.5, weight_decay=0.1))
        for _ in range(2):
            weight.grad = np.full_like(weight.data, 1.0)
            optimizer.step(epoch=0)
        # step 1: v=1, p=(1-0.1)*(1-0.01)=0.891; step 2: v=1.5, p=(0.891-0.15)*0.99
        np.testing.assert_allclose(weight.data, (0.891 - 0.15) * 0.99)

    def test_frozen_group_unchanged(self, tiny_spec):
        network = convert_to_abnn(build(tiny_spec, seed=0))
        before = [t.data.copy() for t in network.param_groups["linear_weights"]]
        for _, tensor in network.parameters():
            tensor.grad = np.ones_like(tensor.data)
        sgd_step(network, TrainConfig(epochs=1, batch_size=2, lr=0.1), epoch=0)
        for old, tensor in zip(before, network.param_groups["linear_weights"]):
            assert np.array_equal(old, tensor.data)
        assert not np.array_equal(network.param_groups["norm_gamma"][0].data, 1.0)

    def test_missing_gradient(self, tiny_spec):
        network = build(tiny_spec, seed=0)
        with pytest.raises(MissingGradientError):
            SGD(network, TrainConfig(epochs=1, batch_size=2, lr=0.1)).step(epoch=0)

    def test_milestone_schedule(self):
        config = TrainConfig(epochs=3, batch_size=2, lr=0.1, milestones=[1], gamma_lr=0.5)
        assert learning_rate(config, 0) == 0.1
        assert learning_rate(config, 1) == 0.05
        assert learning_rate(config, 2) == 0.05

    def test_milestones_validated(self):
        with pytest.raises(ValidationError):
            TrainConfig(epochs=3, batch_size=2, lr=0.1, milestones=[2, 1])
        with pytest.raises(ValidationError):
            TrainConfig(epochs=3, batch_size=2, lr=0.1, nesterov=True)


class TestLoopHelpers:
    """Batching and the divergence guard."""

    def test_trailing_single_sample_dropped(self, rng):
        x, y = np.arange(10.0).reshape(5, 2), np.zeros(5, dtype=int)
        sizes = [len(batch[1]) for batch in iter_batches(x, y, 2, rng)]
        assert sizes == [2, 2]

    def test_batches_cover_a_permutation(self, rng):
        x, y = np.arange(16.0).reshape(8, 2), np.arange(8)
        batches = [batch[1] for batch in iter_batches(x, y, 3, rng)]
        assert [len(b) for b in batches] == [3, 3, 2]
        assert sorted(np.concatenate(batches).tolist()) == list(range(8))

    def test_trailing_singleton_is_the_only_loss(self, rng):
        x, y = np.arange(14.0).reshape(7, 2), np.arange(7)
        seen = np.concatenate([batch[1] for batch in iter_batches(x, y, 3, rng)])
        assert len(seen) == 6 and len(set(seen.tolist())) == 6

    def test_non_finite_loss(self):
        with pytest.raises(DivergenceError) as info:
            DivergenceGuard(mode=2).update(4, float("nan"))
        assert info.value.epoch == 4 and info.value.mode == 2

    def test_exploding_loss_needs_patience(self):
        guard = DivergenceGuard()
        guard.update(0, 1.0)
        guard.update(1, 11.0)
        guard.update(2, 12.0)
        guard.update(3, 0.5)
        guard.update(4, 20.0)
        guard.update(5, 20.0)
        with pytest.raises(DivergenceError) as info:
            guard.update(6, 20.0)
        assert info.value.epoch == 6


class TestPretrain:
    """Deterministic pre-training."""

    def test_zero_epochs_is_initialization(self, moons, tiny_spec):
        ckpt = pretrain(tiny_spec, moons, TrainConfig(epochs=0, batch_size=32, lr=0.1, seed=4))
        init = build(tiny_spec, seed=4)
        for (_, a), (_, b) in zip(ckpt.network.parameters(), init.parameters()):
            assert np.array_equal(a.data, b.data)
        assert ckpt.metadata.loss_curve == []

    def test_reproducible(self, moons, tiny_spec):
        config = TrainConfig(epochs=2, batch_size=32, lr=0.05, seed=1)
        a, b = pretrain(tiny_spec, moons, config), pretrain(tiny_spec, moons, config)
        assert a.metadata.loss_curve == b.metadata.loss_curve
        for (_, x), (_, y) in zip(a.network.parameters(), b.network.parameters()):
            assert np.array_equal(x.data, y.data)

    def test_learns_two_moons(self, moons):
        spec = ArchSpec.mlp(2, [16], 2, norm=NormKind.LAYER)
        ckpt = pretrain(spec, moons, TrainConfig(epochs=30, batch_size=32, lr=0.1, seed=0))
        probs = ckpt.network.predict_proba(moons.train.x)
        assert accuracy(probs, moons.train.y) > 0.85
        assert ckpt.metadata.loss_curve[-1] < ckpt.metadata.loss_curve[0]


class TestFinetune:
    """ABNN fine-tuning into a ModeSet."""

    @pytest.fixture
    def ckpt(self, moons, tiny_spec):
        return pretrain(tiny_spec, moons, TrainConfig(epochs=2, batch_size=32, lr=0.05, seed=0))

    def test_identity_pipeline(self, ckpt, moons):
        modes = finetune_abnn(ckpt, moons, finetune_config(epochs=0, M=1, prior_p=0.0, alpha=0.0))
        assert modes.M == 1 and modes.form is NetworkForm.ABNN
        x = moons.test.x
        assert np.array_equal(modes.modes[0].predict_proba(x), ckpt.network.predict_proba(x))

    def test_modes_differ(self, ckpt, moons):
        modes = finetune_abnn(ckpt, moons, finetune_config(M=3))
        for i in range(3):
            for j in range(i + 1, 3):
                assert parameter_distance(modes.modes[i], modes.modes[j]) > 0

    def test_only_norm_parameters_move(self, ckpt, moons):
        modes = finetune_abnn(ckpt, moons, finetune_config(M=1))
        tuned = modes.modes[0]
        for a, b in zip(tuned.param_groups["linear_weights"], ckpt.network.param_groups["linear_weights"]):
            assert np.array_equal(a.data, b.data)
        assert parameter_distance(tuned, ckpt.network, trainable_only=False) > 0

    def test_running_stats_frozen_by_default(self, ckpt, moons):
        modes = finetune_abnn(ckpt, moons, finetune_config(M=1))
        for a, b in zip(modes.modes[0].norm_layers, ckpt.network.norm_layers):
            assert np.array_equal(a.running_mean, b.running_mean)

    def test_running_stats_flag(self, ckpt, moons):
        modes = finetune_abnn(ckpt, moons, finetune_config(M=1, update_running_stats=True))
        assert not np.array_equal(modes.modes[0].norm_layers[0].running_mean, ckpt.network.norm_layers[0].running_mean)

    def test_parallel_matches_serial(self, ckpt, moons):
        serial = finetune_abnn(ckpt, moons, finetune_config(M=2), jobs=1)
        parallel = finetune_abnn(ckpt, moons, finetune_config(M=2), jobs=2)
        for a, b in zip(serial.modes, parallel.modes):
            assert parameter_distance(a, b) == 0.0
        assert serial.priors == parallel.priors

    def test_config_echo(self, ckpt, moons):
        modes = finetune_abnn(ckpt, moons, finetune_config(), M=3, prior_p=0.25)
        assert modes.config["M"] == 3 and modes.config["prior_p"] == 0.25
        assert all(prior.bernoulli_p == 0.25 for prior in modes.priors)

    def test_rejects_zero_modes(self, ckpt, moons):
        with pytest.raises(ModeSetError):
            finetune_abnn(ckpt, moons, finetune_config(), M=0)

    def test_rejects_converted_checkpoint(self, ckpt, moons):
        converted = Checkpoint(network=convert_to_abnn(ckpt.network))
        with pytest.raises(ConversionError):
            finetune_abnn(converted, moons, finetune_config())

    def test_alpha_must_be_finite(self):
        with pytest.raises(ValidationError):
            finetune_config(alpha=float("inf"))


class TestModeSet:
    """Mode-set container and persistence."""

    def test_round_trip(self, moons, tiny_spec, tmp_path):
        ckpt = pretrain(tiny_spec, moons, TrainConfig(epochs=1, batch_size=32, lr=0.05, seed=0))
        modes = finetune_abnn(ckpt, moons, finetune_config(M=2))
        save_modeset(modes, tmp_path / "modes")
        restored = load_modeset(tmp_path / "modes")
        assert restored.M == 2 and restored.priors == modes.priors
        assert restored.config == modes.config
        for a, b in zip(modes.modes, restored.modes):
            assert parameter_distance(a, b) == 0.0
        first = (tmp_path / "modes" / "modeset.json").read_bytes()
        save_modeset(restored, tmp_path / "again")
        assert (tmp_path / "again" / "modeset.json").read_bytes() == first
        assert (tmp_path / "again" / "mode_1.abnn").read_bytes() == (tmp_path / "modes" / "mode_1.abnn").read_bytes()

    def test_empty(self):
        with pytest.raises(ModeSetError):
            ModeSet(modes=[], priors=[])

    def test_mixed_architectures(self, tiny_spec):
        other = ArchSpec.mlp(2, [4], 2)
        with pytest.raises(ModeSetError):
            ModeSet(modes=[build(tiny_spec, 0), build(other, 0)], priors=[RandomPrior.off(2)] * 2)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ModeSetError):
            load_modeset(tmp_path)


class TestDeepEnsemble:
    """Independently pretrained members."""

    def test_members_differ(self, moons, tiny_spec):
        ensemble = pretrain_ensemble(tiny_spec, moons, TrainConfig(epochs=1, batch_size=32, lr=0.05, seed=0), M=2)
        assert ensemble.M == 2 and ensemble.form is NetworkForm.DETERMINISTIC
        assert parameter_distance(ensemble.modes[0], ensemble.modes[1]) > 0
        assert all(prior.eta == [0, 0] for prior in ensemble.priors)

    def test_gradients_flow_through_a_member(self, moons, tiny_spec):
        ensemble = pretrain_ensemble(tiny_spec, moons, TrainConfig(epochs=0, batch_size=32, lr=0.05, seed=0), M=1)
        network = ensemble.modes[0]
        with Graph() as graph:
            graph.backward(map_loss(network, (moons.train.x[:8], moons.train.y[:8])))
        assert all(t.grad is not None for _, t in network.parameters())


class TestLossGradients:
    """The fine-tuning objective differentiated through an ABNN network."""

    @staticmethod
    def setup(seed: int):
        rng = np.random.default_rng(seed)
        spec = ArchSpec.mlp(3, [6, 5], 3, norm=NormKind.BATCH, activation=Activation.TANH)
        network = convert_to_abnn(build(spec, seed), alpha=0.3)
        for layer in network.norm_layers:
            layer.gamma = Tensor(rng.uniform(0.5, 1.5, size=layer.features), requires_grad=True)
            layer.beta = Tensor(rng.normal(scale=0.2, size=layer.features), requires_grad=True)
        x = rng.normal(size=(8, 3))
        labels = rng.integers(0, 3, size=8)
        prior = RandomPrior(eta=[1] + rng.integers(0, 2, size=2).tolist(), bernoulli_p=0.5, seed=seed)
        noise = network.sample_noise(rng)
        return network, x, labels, prior, noise

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("param", ["gamma", "beta"])
    def test_random_prior_loss(self, seed, param):
        network, x, labels, prior, noise = self.setup(seed)
        layer = network.norm_layers[seed % 2]

        def f(value: Tensor) -> Tensor:
            setattr(layer, param, value)
            return random_prior_loss(network, (x, labels), prior, noise=noise, update_running=False)

        assert finite_diff_check(f, Tensor(getattr(layer, param).data.copy())) < 1e-4

    @pytest.mark.parametrize("seed", range(10))
    def test_total_loss_wrt_gamma(self, seed):
        network, x, labels, prior, noise = self.setup(seed)
        layer = network.norm_layers[0]

        def f(value: Tensor) -> Tensor:
            layer.gamma = value
            return total_loss(network, (x, labels), prior, noise=noise, update_running=False).total

        assert finite_diff_check(f, Tensor(layer.gamma.data.copy())) < 1e-4

    @pytest.mark.parametrize("seed", range(10))
    def test_total_loss_wrt_inputs(self, seed):
        network, x, labels, prior, noise = self.setup(seed)

        def f(value: Tensor) -> Tensor:
            return total_loss(network, (value, labels), prior, noise=noise, update_running=False).total

        assert finite_diff_check(f, Tensor(x)) < 1e-4
