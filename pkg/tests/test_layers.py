"""Tests for the normalization layers, the BNL and the VI linear layer."""

import numpy as np
import pytest

from src.autodiff import Graph, Tensor, finite_diff_check
from src.errors import BatchTooSmallError, ShapeError
from src.layers import (
    BayesianNormalization,
    Linear,
    NormKind,
    Normalization,
    VILinear,
    bnl_forward,
    inverse_softplus,
    linear_forward,
    norm_forward,
    vi_linear_forward,
)
from src.utils.seeding import make_rng


class TestNormalization:
    """Deterministic batch, layer and instance normalization."""

    def test_batch_train_standardizes(self, rng):
        x = Tensor(rng.normal(5.0, 2.0, size=(64, 3)))
        out = norm_forward(x, Normalization(3, NormKind.BATCH, eps_stability=0.0), training=True).data
        np.testing.assert_allclose(out.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-9)

    def test_zero_gamma_gives_beta(self, rng):
        layer = Normalization(4, NormKind.BATCH)
        layer.gamma = Tensor(np.zeros(4), requires_grad=True)
        layer.beta = Tensor(np.full(4, 7.0), requires_grad=True)
        out = norm_forward(Tensor(rng.normal(size=(5, 4))), layer, training=True).data
        np.testing.assert_array_equal(out, 7.0)

    def test_layer_norm_by_hand(self):
        out = norm_forward(Tensor([[1.0, 2.0], [3.0, 4.0]]), Normalization(2, NormKind.LAYER, eps_stability=0.0)).data
        np.testing.assert_array_equal(out, [[-1.0, 1.0], [-1.0, 1.0]])

    def test_instance_matches_layer(self, rng):
        x = Tensor(rng.normal(size=(4, 5)))
        a = norm_forward(x, Normalization(5, NormKind.LAYER)).data
        b = norm_forward(x, Normalization(5, NormKind.INSTANCE)).data
        np.testing.assert_array_equal(a, b)

    def test_batch_of_one_needs_running_stats(self):
        layer = Normalization(3, NormKind.BATCH)
        with pytest.raises(BatchTooSmallError):
            norm_forward(Tensor(np.ones((1, 3))), layer, training=True)
        # eval mode uses the running statistics
        out = norm_forward(Tensor(np.ones((1, 3))), layer, training=False).data
        assert out.shape == (1, 3)

    def test_running_stats_update(self, rng):
        layer = Normalization(2, NormKind.BATCH, momentum=0.5)
        x = rng.normal(3.0, 1.0, size=(16, 2))
        norm_forward(Tensor(x), layer, training=True)
        np.testing.assert_allclose(layer.running_mean, 0.5 * x.mean(axis=0))
        np.testing.assert_allclose(layer.running_var, 0.5 + 0.5 * x.var(axis=0))
        assert np.all(layer.running_var > 0)

    def test_frozen_running_stats(self, rng):
        layer = Normalization(2, NormKind.BATCH)
        norm_forward(Tensor(rng.normal(size=(8, 2))), layer, training=True, update_running=False)
        np.testing.assert_array_equal(layer.running_mean, 0.0)
        np.testing.assert_array_equal(layer.running_var, 1.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            norm_forward(Tensor(np.ones((2, 3))), Normalization(4))

    def test_invalid_settings(self):
        with pytest.raises(ValueError):
            Normalization(3, eps_stability=-1.0)
        with pytest.raises(ValueError):
            Normalization(3, momentum=1.0)

    @pytest.mark.parametrize("kind", list(NormKind))
    @pytest.mark.parametrize("seed", range(10))
    def test_gradients(self, kind, seed):
        rng = np.random.default_rng(seed)
        layer = Normalization(4, kind)
        layer.gamma = Tensor(rng.normal(size=4), requires_grad=True)
        weights = Tensor(rng.normal(size=(6, 4)))

        def f(x: Tensor) -> Tensor:
            return (norm_forward(x, layer, training=True, update_running=False) * weights).sum()

        assert finite_diff_check(f, Tensor(rng.normal(size=(6, 4)))) < 1e-4


class TestBayesianNormalization:
    """The BNL reduces to the plain normalization without noise."""

    @pytest.mark.parametrize("kind", list(NormKind))
    @pytest.mark.parametrize("training", [True, False])
    def test_zero_epsilon_is_bit_identical(self, rng, kind, training):
        norm = Normalization(5, kind)
        norm.gamma = Tensor(rng.normal(size=5), requires_grad=True)
        norm.beta = Tensor(rng.normal(size=5), requires_grad=True)
        norm.running_mean = rng.normal(size=5)
        norm.running_var = rng.uniform(0.5, 2.0, size=5)
        bnl = BayesianNormalization.from_normalization(norm, alpha=0.3)
        x = Tensor(rng.normal(size=(7, 5)))
        expected = norm_forward(x, norm, training=training, update_running=False).data
        actual = bnl_forward(x, bnl, epsilon=np.zeros(5), training=training, update_running=False).data
        assert np.array_equal(expected, actual)

    def test_zero_alpha_ignores_noise(self, rng):
        norm = Normalization(3, NormKind.LAYER)
        bnl = BayesianNormalization.from_normalization(norm, alpha=0.0)
        x = Tensor(rng.normal(size=(4, 3)))
        expected = norm_forward(x, norm).data
        assert np.array_equal(bnl_forward(x, bnl, epsilon=rng.normal(size=3)).data, expected)

    def test_scaling_by_hand(self):
        layer = BayesianNormalization(2, NormKind.BATCH, alpha=1.0, eps_stability=0.0)
        x = Tensor([[1.0, -1.0], [-1.0, 1.0]])
        out = bnl_forward(x, layer, epsilon=np.array([0.5, -0.5]), training=True).data
        np.testing.assert_allclose(out, x.data * np.array([1.5, 0.5]))

    def test_noise_is_replayable(self):
        layer = BayesianNormalization(4, noise_seed=11)
        first = layer.sample_epsilon()
        assert layer.calls == 1
        np.testing.assert_array_equal(first, make_rng(11, 0).standard_normal(4))
        layer.calls = 0
        np.testing.assert_array_equal(layer.sample_epsilon(), first)
        assert not np.array_equal(layer.sample_epsilon(), first)

    def test_epsilon_shape_checked(self):
        layer = BayesianNormalization(3)
        with pytest.raises(ShapeError):
            bnl_forward(Tensor(np.ones((2, 3))), layer, epsilon=np.zeros(2))

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            BayesianNormalization(3, alpha=-0.1)
        with pytest.raises(ValueError):
            BayesianNormalization(3, alpha=float("inf"))

    def test_gradients_reach_gamma_and_beta_only(self, rng):
        layer = BayesianNormalization(3, NormKind.LAYER, alpha=0.5)
        x = Tensor(rng.normal(size=(4, 3)))
        with Graph() as graph:
            graph.backward(bnl_forward(x, layer, epsilon=rng.normal(size=3)).square().sum())
        assert layer.gamma.grad.shape == (3,)
        assert layer.beta.grad.shape == (3,)
        assert x.grad is None


class TestLinearLayers:
    """Bias-free linear and the VI linear baseline."""

    def test_linear_shape(self, rng):
        layer = Linear(3, 5, rng)
        assert layer.weight.shape == (5, 3)
        assert layer(Tensor(np.ones((2, 3)))).shape == (2, 5)

    def test_vi_zero_sigma_matches_linear(self, rng):
        w_mu = rng.normal(size=(3, 2))
        layer = VILinear.from_params(w_mu, np.zeros((3, 2)))
        x = Tensor(rng.normal(size=(4, 2)))
        expected = linear_forward(x, Tensor(w_mu)).data
        assert np.array_equal(vi_linear_forward(x, layer, rng.normal(size=(3, 2))).data, expected)

    def test_vi_zero_noise_matches_linear(self, rng):
        w_mu = rng.normal(size=(3, 2))
        layer = VILinear.from_params(w_mu, np.full((3, 2), 0.5))
        x = Tensor(rng.normal(size=(4, 2)))
        expected = linear_forward(x, Tensor(w_mu)).data
        assert np.array_equal(vi_linear_forward(x, layer, np.zeros((3, 2))).data, expected)

    def test_vi_by_hand(self):
        layer = VILinear.from_params(np.eye(2), np.eye(2))
        out = vi_linear_forward(Tensor([[1.0, 1.0]]), layer, np.diag([1.0, -1.0])).data
        np.testing.assert_allclose(out, [[2.0, 0.0]], atol=1e-12)

    def test_inverse_softplus(self):
        sigma = np.array([1e-3, 0.5, 2.0])
        np.testing.assert_allclose(np.logaddexp(0.0, inverse_softplus(sigma)), sigma, rtol=1e-12)
        assert np.logaddexp(0.0, inverse_softplus(np.array([0.0])))[0] == 0.0
        with pytest.raises(ValueError):
            inverse_softplus(np.array([-1.0]))

    def test_vi_noise_shape_checked(self, rng):
        layer = VILinear(2, 3, rng)
        with pytest.raises(ShapeError):
            vi_linear_forward(Tensor(np.ones((1, 2))), layer, np.zeros((2, 3)))

    def test_vi_gradients(self, rng):
        layer = VILinear(3, 2, rng, sigma_init=0.1)
        noise = rng.normal(size=(2, 3))
        x = Tensor(rng.normal(size=(5, 3)))
        with Graph() as graph:
            graph.backward(vi_linear_forward(x, layer, noise).square().sum())
        assert layer.w_mu.grad.shape == (2, 3)
        assert layer.w_rho.grad.shape == (2, 3)


class TestParameterGradients:
    """Central differences on the trainable parameters of the stochastic layers."""

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("kind", [NormKind.BATCH, NormKind.LAYER])
    @pytest.mark.parametrize("param", ["gamma", "beta"])
    def test_bnl_affine_at_fixed_epsilon(self, seed, kind, param):
        rng = np.random.default_rng(seed)
        layer = BayesianNormalization(4, kind, alpha=0.5)
        layer.gamma = Tensor(rng.normal(size=4), requires_grad=True)
        layer.beta = Tensor(rng.normal(size=4), requires_grad=True)
        x = Tensor(rng.normal(size=(6, 4)))
        epsilon = rng.normal(size=4)
        weights = Tensor(rng.normal(size=(6, 4)))

        def f(value: Tensor) -> Tensor:
            setattr(layer, param, value)
            out = bnl_forward(x, layer, epsilon=epsilon, training=True, update_running=False)
            return (out * weights).tanh().sum()

        assert finite_diff_check(f, Tensor(getattr(layer, param).data.copy())) < 1e-4

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("param", ["w_mu", "w_rho"])
    def test_vi_mean_and_scale(self, seed, param):
        rng = np.random.default_rng(seed)
        layer = VILinear.from_params(rng.normal(size=(3, 4)), rng.uniform(0.05, 0.5, size=(3, 4)))
        x = Tensor(rng.normal(size=(5, 4)))
        noise = rng.normal(size=(3, 4))
        weights = Tensor(rng.normal(size=(5, 3)))

        def f(value: Tensor) -> Tensor:
            setattr(layer, param, value)
            return (vi_linear_forward(x, layer, noise) * weights).tanh().sum()

        assert finite_diff_check(f, Tensor(getattr(layer, param).data.copy())) < 1e-4
