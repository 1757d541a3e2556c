import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import finite_difference_grads, guarded_relative_error, scalar_adam_reference
from quadndr.network import (
    AdamState,
    Conv1dLayer,
    DenseLayer,
    NetConfig,
    TrainConfig,
    TrainingDiverged,
    adam_step,
    backward,
    conv1d_forward,
    dense_forward,
    dropout_forward,
    forward_multi_head,
    forward_single_head,
    init_params,
    leaky_relu,
    load_model,
    loss_and_gradients,
    mse_loss,
    predict,
    save_model,
    train,
)
from quadndr.windows import NormStats

TINY_SINGLE = NetConfig(arch="single", window=8, dropout=0.0,
                        conv_channels=(6, 4, 4), dense_widths=(6, 4))
TINY_MULTI = NetConfig(arch="multi", window=8, dropout=0.0,
                       conv_channels=(3, 4, 4), dense_widths=(6, 4))


def zero_params(cfg, head_bias=None):
    params = init_params(cfg, seed=0)
    zeroed = {k: np.zeros_like(v) for k, v in params.items()}
    if head_bias is not None:
        zeroed["head.b"] = np.array(head_bias, dtype=float)
    return zeroed


class TestLeakyRelu:
    def test_examples(self):
        assert leaky_relu(2.0) == 2.0
        assert leaky_relu(-1.0) == -0.01
        assert leaky_relu(0.0) == 0.0

    def test_custom_alpha(self):
        assert leaky_relu(-2.0, alpha=0.1) == pytest.approx(-0.2)

    def test_rejects_non_positive_alpha(self):
        with pytest.raises(ValueError):
            leaky_relu(1.0, alpha=0.0)


class TestConv1d:
    def test_moving_sum(self):
        layer = Conv1dLayer(weights=np.ones((1, 1, 2)), bias=np.zeros(1))
        y = conv1d_forward(layer, [[1.0, 2.0, 3.0]])
        assert np.array_equal(y, [[3.0, 5.0]])

    def test_identity_kernel_with_padding(self):
        w = np.zeros((1, 1, 3))
        w[0, 0, 1] = 1.0
        layer = Conv1dLayer(weights=w, bias=np.zeros(1), padding=1)
        x = np.array([[4.0, -1.0, 2.0, 7.0]])
        assert np.array_equal(conv1d_forward(layer, x), x)

    def test_zero_weights_yield_bias(self):
        layer = Conv1dLayer(weights=np.zeros((2, 3, 3)), bias=np.array([1.5, -0.5]),
                            padding=1)
        y = conv1d_forward(layer, np.random.default_rng(0).normal(size=(3, 5)))
        assert np.array_equal(y[0], np.full(5, 1.5))
        assert np.array_equal(y[1], np.full(5, -0.5))

    def test_rejects_channel_mismatch(self):
        layer = Conv1dLayer(weights=np.ones((1, 2, 2)), bias=np.zeros(1))
        with pytest.raises(ValueError):
            conv1d_forward(layer, [[1.0, 2.0]])

    def test_rejects_input_shorter_than_kernel(self):
        layer = Conv1dLayer(weights=np.ones((1, 1, 4)), bias=np.zeros(1))
        with pytest.raises(ValueError):
            conv1d_forward(layer, [[1.0, 2.0]])


class TestDense:
    def test_example(self):
        layer = DenseLayer(weights=np.array([[1.0, 2.0], [0.0, -1.0]]),
                           bias=np.array([0.5, 0.0]))
        assert np.array_equal(dense_forward(layer, [3.0, 4.0]), [11.5, -4.0])

    def test_rejects_length_mismatch(self):
        layer = DenseLayer(weights=np.ones((2, 3)), bias=np.zeros(2))
        with pytest.raises(ValueError):
            dense_forward(layer, [1.0, 2.0])


class TestDropout:
    def test_inference_is_identity(self):
        x = np.arange(12.0).reshape(3, 4)
        assert np.array_equal(dropout_forward(x, 0.5, training=False), x)

    def test_zero_rate_is_identity(self):
        x = np.arange(12.0).reshape(3, 4)
        assert np.array_equal(dropout_forward(x, 0.0, training=True), x)

    def test_seed_deterministic(self):
        x = np.ones((4, 100))
        a = dropout_forward(x, 0.3, training=True, seed=5)
        b = dropout_forward(x, 0.3, training=True, seed=5)
        assert np.array_equal(a, b)

    def test_survivors_are_rescaled(self):
        x = np.ones((4, 1000))
        y = dropout_forward(x, 0.25, training=True, seed=1)
        kept = y[y != 0.0]
        assert np.allclose(kept, 1.0 / 0.75)
        assert 0.6 < kept.size / x.size < 0.9

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            dropout_forward(np.ones(3), 1.0, training=True)


class TestForward:
    def test_zero_network_outputs_zero(self):
        out = forward_single_head(zero_params(TINY_SINGLE), TINY_SINGLE,
                                  np.ones((6, 8)))
        assert np.array_equal(out, np.zeros(3))

    def test_head_bias_passes_through_zero_weights(self):
        params = zero_params(TINY_SINGLE, head_bias=(1.0, 2.0, 3.0))
        out = forward_single_head(params, TINY_SINGLE, np.ones((6, 8)))
        assert np.array_equal(out, [1.0, 2.0, 3.0])

    def test_single_head_shape_and_determinism(self):
        params = init_params(TINY_SINGLE, seed=3)
        x = np.random.default_rng(7).normal(size=(6, 8))
        a = forward_single_head(params, TINY_SINGLE, x)
        b = forward_single_head(params, TINY_SINGLE, x)
        assert a.shape == (3,)
        assert np.array_equal(a, b)
        assert np.all(np.isfinite(a))

    def test_multi_head_uses_both_branches(self):
        params = init_params(TINY_MULTI, seed=3)
        rng = np.random.default_rng(5)
        acc, gyro = rng.normal(size=(3, 8)), rng.normal(size=(3, 8))
        base = forward_multi_head(params, TINY_MULTI, acc, gyro)
        swapped = forward_multi_head(params, TINY_MULTI, gyro, acc)
        assert base.shape == (3,)
        assert not np.array_equal(base, swapped)

    def test_multi_rejects_wrong_shapes(self):
        params = init_params(TINY_MULTI, seed=0)
        with pytest.raises(ValueError):
            forward_multi_head(params, TINY_MULTI, np.ones((3, 7)), np.ones((3, 8)))

    def test_arch_config_mismatch(self):
        with pytest.raises(ValueError):
            forward_single_head(init_params(TINY_MULTI, seed=0), TINY_MULTI,
                                np.ones((6, 8)))

    def test_predict_matches_per_sample_inference(self):
        params = init_params(TINY_SINGLE, seed=9)
        x = np.random.default_rng(2).normal(size=(5, 6, 8))
        batched = predict(params, TINY_SINGLE, x)
        singles = np.stack([forward_single_head(params, TINY_SINGLE, xi) for xi in x])
        assert np.allclose(batched, singles, atol=1e-12)

    def test_default_channel_progressions(self):
        assert NetConfig(arch="single", window=100).conv_channels == \
            (6, 64, 64, 128, 128, 256, 256)
        assert NetConfig(arch="multi", window=100).conv_channels == \
            (3, 32, 32, 64, 64, 128, 128)
        assert NetConfig(arch="single", window=100).dense_widths == (512, 128)


class TestMseLoss:
    def test_zero_error(self):
        assert mse_loss([[1.0, 2.0, 3.0]], [[1.0, 2.0, 3.0]]) == 0.0

    def test_unit_offset_single_sample(self):
        assert mse_loss([[1.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]]) == 1.0

    def test_mean_over_samples_of_squared_norm(self):
        pred = [[1.0, 1.0, 1.0], [0.0, 0.0, 1.0]]
        targ = [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]
        assert mse_loss(pred, targ) == 2.0

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse_loss([[1.0, 2.0, 3.0]], [[1.0, 2.0]])


class TestGradients:
    def test_perfect_predictions_give_zero_head_gradients(self):
        params = init_params(TINY_SINGLE, seed=4)
        x = np.random.default_rng(1).normal(size=(3, 6, 8))
        targets = predict(params, TINY_SINGLE, x)
        grads = backward(params, TINY_SINGLE, x, targets)
        assert np.array_equal(grads["head.w"], np.zeros_like(grads["head.w"]))
        assert np.array_equal(grads["head.b"], np.zeros_like(grads["head.b"]))

    def test_head_gradients_match_hand_formula(self):
        params = init_params(TINY_SINGLE, seed=4)
        x = np.random.default_rng(1).normal(size=(4, 6, 8))
        targets = np.random.default_rng(2).normal(size=(4, 3))
        fd = finite_difference_grads(params, TINY_SINGLE, x, targets,
                                     names={"head.w", "head.b"})
        grads = backward(params, TINY_SINGLE, x, targets)
        assert guarded_relative_error({k: grads[k] for k in fd}, fd) < 1e-4

    @pytest.mark.parametrize("cfg", [TINY_SINGLE, TINY_MULTI],
                             ids=["single", "multi"])
    def test_all_gradients_match_finite_differences(self, cfg):
        params = init_params(cfg, seed=11)
        rng = np.random.default_rng(11)
        x = rng.normal(size=(2, 6, 8))
        targets = rng.normal(size=(2, 3))
        loss, grads, _ = loss_and_gradients(params, cfg, x, targets)
        fd = finite_difference_grads(params, cfg, x, targets)
        assert set(grads) == set(fd)
        assert guarded_relative_error(grads, fd) < 1e-4


class TestAdam:
    def test_hand_computed_first_step(self):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params, lr=1e-3)
        new, state = adam_step(params, {"w": np.array([1.0])}, state)
        assert new["w"][0] == pytest.approx(-1e-3 / (1.0 + 1e-8), abs=1e-18)
        assert state.t == 1

    def test_hand_computed_second_step(self):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params, lr=1e-3)
        for _ in range(2):
            params, state = adam_step(params, {"w": np.array([1.0])}, state)
        assert params["w"][0] == pytest.approx(-2e-3 / (1.0 + 1e-8), rel=1e-9)

    def test_zero_gradient_keeps_parameters(self):
        params = {"w": np.array([1.5, -2.0])}
        state = AdamState.for_params(params)
        new, _ = adam_step(params, {"w": np.zeros(2)}, state)
        assert np.array_equal(new["w"], params["w"])

    def test_rejects_non_finite_gradients(self):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params)
        with pytest.raises(TrainingDiverged):
            adam_step(params, {"w": np.array([np.nan])}, state)

    def test_matches_scalar_reference_sequences(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            theta0 = float(rng.normal())
            gs = rng.normal(size=10)
            params = {"w": np.array([theta0])}
            state = AdamState.for_params(params, lr=1e-3)
            trace = []
            for g in gs:
                params, state = adam_step(params, {"w": np.array([g])}, state)
                trace.append(params["w"][0])
            ref = scalar_adam_reference(theta0, gs)
            assert np.max(np.abs(np.array(trace) - np.array(ref))) < 1e-12


class TestTrain:
    def make_data(self, m=48):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(m, 6, 8))
        y = rng.normal(scale=0.1, size=(m, 3))
        return x, y

    def test_zero_epochs_is_identity(self):
        x, y = self.make_data()
        params = init_params(TINY_SINGLE, seed=1)
        out, history = train(dict(params), TINY_SINGLE, x, y, TrainConfig(epochs=0))
        assert history == []
        for k in params:
            assert np.array_equal(out[k], params[k])

    def test_seeded_runs_are_identical(self):
        x, y = self.make_data()
        tcfg = TrainConfig(epochs=3, batch_size=16, seed=7)
        _, h1 = train(init_params(TINY_SINGLE, seed=1), TINY_SINGLE, x, y, tcfg)
        _, h2 = train(init_params(TINY_SINGLE, seed=1), TINY_SINGLE, x, y, tcfg)
        assert h1 == h2

    def test_loss_decreases_on_learnable_data(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(64, 6, 8))
        y = np.stack([x[:, 0].mean(axis=1), x[:, 1].mean(axis=1),
                      x[:, 2].mean(axis=1)], axis=1)
        _, history = train(init_params(TINY_SINGLE, seed=2), TINY_SINGLE, x, y,
                           TrainConfig(epochs=80, batch_size=16, seed=5))
        assert history[-1] < 0.5 * history[0]

    def test_stop_ratio_ends_early(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(64, 6, 8))
        y = np.stack([x[:, 0].mean(axis=1)] * 3, axis=1)
        _, history = train(init_params(TINY_SINGLE, seed=2), TINY_SINGLE, x, y,
                           TrainConfig(epochs=200, batch_size=16, seed=5,
                                       stop_ratio=0.5))
        assert len(history) < 200
        assert history[-1] < 0.5 * history[0]

    def test_rejects_empty_training_set(self):
        with pytest.raises(ValueError):
            train(init_params(TINY_SINGLE, seed=0), TINY_SINGLE,
                  np.empty((0, 6, 8)), np.empty((0, 3)), TrainConfig(epochs=1))

    def test_non_finite_input_raises(self):
        x, y = self.make_data()
        x[0, 0, 0] = np.nan
        with pytest.raises(TrainingDiverged):
            train(init_params(TINY_SINGLE, seed=0), TINY_SINGLE, x, y,
                  TrainConfig(epochs=1))


class TestModelFile:
    def test_roundtrip_is_exact(self, tmp_path):
        params = init_params(TINY_MULTI, seed=13)
        norm = NormStats(mean=np.random.default_rng(0).normal(size=6),
                         std=np.abs(np.random.default_rng(1).normal(size=6)) + 0.1)
        path = tmp_path / "model.qpnet"
        save_model(path, params, TINY_MULTI, norm=norm)
        back_params, back_cfg, back_norm = load_model(path)
        assert back_cfg == TINY_MULTI
        assert set(back_params) == set(params)
        for k in params:
            assert np.array_equal(back_params[k], params[k])
        assert np.array_equal(back_norm.mean, norm.mean)
        assert np.array_equal(back_norm.std, norm.std)

    def test_roundtrip_without_norm(self, tmp_path):
        params = init_params(TINY_SINGLE, seed=13)
        path = tmp_path / "model.qpnet"
        save_model(path, params, TINY_SINGLE)
        _, _, norm = load_model(path)
        assert norm is None

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.qpnet"
        path.write_text("NOTAMODEL\n")
        with pytest.raises(ValueError):
            load_model(path)

    def test_loaded_model_predicts_identically(self, tmp_path):
        params = init_params(TINY_SINGLE, seed=21)
        path = tmp_path / "model.qpnet"
        save_model(path, params, TINY_SINGLE)
        back, cfg, _ = load_model(path)
        x = np.random.default_rng(4).normal(size=(3, 6, 8))
        assert np.array_equal(predict(params, TINY_SINGLE, x), predict(back, cfg, x))


class TestNetConfigValidation:
    def test_rejects_unknown_arch(self):
        with pytest.raises(ValueError):
            NetConfig(arch="triple", window=8)

    def test_rejects_wrong_input_channels(self):
        with pytest.raises(ValueError):
            NetConfig(arch="single", window=8, conv_channels=(3, 4))

    def test_rejects_bad_dropout(self):
        with pytest.raises(ValueError):
            NetConfig(arch="single", window=8, dropout=1.0)
