import numpy as np
import pytest

from factorcast import tcn
from factorcast.errors import ConfigError, NumericalError


def tiny_config(**overrides):
    base = dict(
        input_width=3, output_width=2, channels=(4,), kernel_size=2,
        dilations=(1,), activation="relu", learning_rate=1e-3, epochs=50,
        seed=0, patience=None,
    )
    base.update(overrides)
    return tcn.TcnConfig(**base)


class TestConfig:
    def test_receptive_field(self):
        cfg = tcn.TcnConfig(input_width=1, output_width=1, channels=(8, 8, 8),
                            kernel_size=3, dilations=(1, 2, 4))
        assert cfg.receptive_field == 1 + 2 * (1 + 2 + 4) * 2

    def test_min_history_enforced(self):
        with pytest.raises(ConfigError):
            tcn.TcnConfig(input_width=1, output_width=1, channels=(4,),
                          kernel_size=2, dilations=(1,), min_history=10)

    def test_validation(self):
        with pytest.raises(ConfigError):
            tiny_config(kernel_size=1)
        with pytest.raises(ConfigError):
            tiny_config(channels=(4, 4))  # length mismatch with dilations
        with pytest.raises(ConfigError):
            tiny_config(dropout_rate=1.0)
        with pytest.raises(ConfigError):
            tiny_config(activation="tanh")
        with pytest.raises(ConfigError):
            tiny_config(output_shape=(3, 3))  # does not flatten to width 2


class TestInit:
    def test_same_seed_bit_identical(self):
        a = tcn.init_model(tiny_config(seed=5))
        b = tcn.init_model(tiny_config(seed=5))
        np.testing.assert_array_equal(a.params, b.params)
        c = tcn.init_model(tiny_config(seed=6))
        assert not np.array_equal(a.params, c.params)

    def test_zero_input_zero_biases_gives_output_bias(self):
        model = tcn.init_model(tiny_config())
        for name in list(model.layout):
            if name.endswith(".b"):
                model.view(name)[...] = 0.0
        model.view("out.b")[...] = [1.5, -2.25]
        out = tcn.forward(model, np.zeros((4, 3)))
        np.testing.assert_array_equal(out, np.tile([1.5, -2.25], (4, 1)))

    def test_parameter_count_hand_tally(self):
        # One block, input 3 -> 5 channels, kernel 2, output width 2:
        # conv1 2*3*5 + 5, conv2 2*5*5 + 5, projection 3*5,
        # output 5*2 + 2 = 117 parameters.
        cfg = tiny_config(channels=(5,))
        assert tcn.parameter_count(cfg) == 117
        assert tcn.init_model(cfg).n_params == 117


class TestForward:
    def test_causality_bitwise(self):
        model = tcn.init_model(tiny_config(channels=(6,), dilations=(2,), kernel_size=3))
        rng = np.random.default_rng(0)
        x = rng.standard_normal((12, 3))
        base = tcn.forward(model, x)
        for t in (4, 7, 11):
            x2 = x.copy()
            x2[t:] += rng.standard_normal(x2[t:].shape)
            out = tcn.forward(model, x2)
            np.testing.assert_array_equal(out[:t], base[:t])

    def test_pencil_and_paper_convolution(self):
        # Single block, one channel, kernel 2, dilation 1, linear
        # activation, hand-set weights:
        #   h1[t] = 1 + 2 x[t] + 3 x[t-1]
        #   h2[t] = -2 + 5 h1[t] + 7 h1[t-1]
        #   y[t]  = h2[t] + x[t]          (identity residual, unit output)
        # For x = [1, -1, 2]: h1 = [3, 2, 2], h2 = [13, 29, 22],
        # y = [14, 28, 24].
        cfg = tcn.TcnConfig(input_width=1, output_width=1, channels=(1,),
                            kernel_size=2, dilations=(1,), activation="linear",
                            patience=None)
        model = tcn.TcnModel(cfg)
        model.view("block0.conv1.w")[...] = np.array([[[2.0]], [[3.0]]])
        model.view("block0.conv1.b")[...] = [1.0]
        model.view("block0.conv2.w")[...] = np.array([[[5.0]], [[7.0]]])
        model.view("block0.conv2.b")[...] = [-2.0]
        model.view("out.w")[...] = [[1.0]]
        model.view("out.b")[...] = [0.0]
        out = tcn.forward(model, np.array([[1.0], [-1.0], [2.0]]))
        np.testing.assert_allclose(out.ravel(), [14.0, 28.0, 24.0], atol=1e-12)

    def test_linear_config_equals_banded_operator(self):
        # With linear activations the network is an affine map whose banded
        # structure follows from distributing the two convolutions:
        #   y[t] = sum_o x[t - o] B[o] Wo + const[t]
        # where B[d*(j1+j2)] accumulates W1[j1] @ W2[j2] and B[0] also takes
        # the residual path.  The constant term is time-dependent near t=0:
        # each conv zero-pads its own input, so the first conv's bias only
        # reaches y[t] through taps j2 with t - d*j2 >= 0.
        cfg = tiny_config(channels=(5,), kernel_size=3, dilations=(2,),
                          activation="linear")
        model = tcn.init_model(cfg)
        w1 = model.view("block0.conv1.w")
        b1 = model.view("block0.conv1.b")
        w2 = model.view("block0.conv2.w")
        b2 = model.view("block0.conv2.b")
        wp = model.view("block0.proj.w")
        wo = model.view("out.w")
        bo = model.view("out.b")

        d = cfg.dilations[0]
        k = cfg.kernel_size
        bands = {}
        for j1 in range(k):
            for j2 in range(k):
                off = d * (j1 + j2)
                bands[off] = bands.get(off, 0) + w1[j1] @ w2[j2]
        bands[0] = bands.get(0, 0) + wp

        rng = np.random.default_rng(1)
        x = rng.standard_normal((15, 3))
        want = np.empty((15, 2))
        for t in range(15):
            b1_through = sum(w2[j2] for j2 in range(k) if t - d * j2 >= 0)
            want[t] = (b1 @ b1_through + b2) @ wo + bo
        for off, band in bands.items():
            for t in range(15):
                if t - off >= 0:
                    want[t] += x[t - off] @ band @ wo
        got = tcn.forward(model, x)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_width_mismatch(self):
        model = tcn.init_model(tiny_config())
        with pytest.raises(ValueError):
            tcn.forward(model, np.zeros((4, 5)))


class TestGradients:
    def test_linear_gradients_near_exact(self):
        cfg = tiny_config(activation="linear", channels=(4, 4), dilations=(1, 2),
                          kernel_size=2)
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(2)
        x = rng.standard_normal((10, 3))
        t = rng.standard_normal((10, 2))
        assert tcn.grad_check(model, x, t, n_params=model.n_params) < 1e-7

    def test_nonlinear_gradients(self):
        cfg = tiny_config(channels=(8, 8), dilations=(1, 2), kernel_size=3)
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(3)
        x = rng.standard_normal((12, 3))
        t = rng.standard_normal((12, 2))
        assert tcn.grad_check(model, x, t, n_params=250) < 1e-4

    def test_zero_input_zeroes_input_facing_kernels(self):
        cfg = tiny_config()
        model = tcn.init_model(cfg)
        x = np.zeros((6, 3))
        t = np.ones((6, 2))
        _, grads = tcn._loss_and_grads(model, model.params, x, t)
        sl, shape = model.layout["block0.conv1.w"]
        np.testing.assert_array_equal(grads[sl], np.zeros(sl.stop - sl.start))
        sl, _ = model.layout["block0.proj.w"]
        np.testing.assert_array_equal(grads[sl], np.zeros(sl.stop - sl.start))


class TestTrain:
    def test_zero_targets_reach_zero_map(self):
        # Constant-lr Adam orbits the zero manifold at a floor proportional
        # to the learning rate, so the budget decays the rate in stages.
        from dataclasses import replace

        cfg = tiny_config(learning_rate=1e-3, epochs=1500, patience=50,
                          early_stop_frac=0.1)
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((40, 3))
        y = np.zeros((40, 2))
        first_trace = None
        for lr, epochs in [(1e-3, 1500), (1e-4, 2000), (1e-5, 3000)]:
            model.config = replace(model.config, learning_rate=lr, epochs=epochs)
            model, trace = tcn.train(model, x, y)
            if first_trace is None:
                first_trace = trace
        out = tcn.forward(model, x)
        assert float(np.mean(out * out)) < 1e-6
        assert first_trace[-1] <= first_trace[0]

    def test_linear_relation_is_learned(self):
        cfg = tiny_config(activation="linear", epochs=4000, learning_rate=1e-3)
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((60, 3))
        m = rng.standard_normal((3, 2))
        y = x @ m
        trained, trace = tcn.train(model, x, y)
        assert trace[-1] < 1e-4
        assert trace[-1] <= trace[0]

    def test_training_is_deterministic(self):
        cfg = tiny_config(epochs=30)
        rng = np.random.default_rng(6)
        x = rng.standard_normal((25, 3))
        y = rng.standard_normal((25, 2))
        m1, t1 = tcn.train(tcn.init_model(cfg), x, y)
        m2, t2 = tcn.train(tcn.init_model(cfg), x, y)
        np.testing.assert_array_equal(m1.params, m2.params)
        np.testing.assert_array_equal(t1, t2)

    def test_dropout_training_is_deterministic(self):
        cfg = tiny_config(epochs=25, dropout_rate=0.2)
        rng = np.random.default_rng(13)
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        m1, t1 = tcn.train(tcn.init_model(cfg), x, y)
        m2, t2 = tcn.train(tcn.init_model(cfg), x, y)
        np.testing.assert_array_equal(m1.params, m2.params)
        np.testing.assert_array_equal(t1, t2)
        assert np.all(np.isfinite(t1))

    def test_minibatch_mode_runs(self):
        cfg = tiny_config(epochs=20, batch_len=8)
        rng = np.random.default_rng(7)
        x = rng.standard_normal((30, 3))
        y = rng.standard_normal((30, 2))
        trained, trace = tcn.train(tcn.init_model(cfg), x, y)
        assert len(trace) == 21
        assert np.all(np.isfinite(trace))

    def test_nan_loss_aborts(self):
        cfg = tiny_config(epochs=5)
        model = tcn.init_model(cfg)
        x = np.full((10, 3), np.nan)
        y = np.zeros((10, 2))
        with pytest.raises(NumericalError):
            tcn.train(model, x, y)

    def test_empty_series_rejected(self):
        model = tcn.init_model(tiny_config())
        with pytest.raises(ValueError):
            tcn.train(model, np.zeros((0, 3)), np.zeros((0, 2)))

    def test_input_model_untouched(self):
        cfg = tiny_config(epochs=10)
        model = tcn.init_model(cfg)
        before = model.params.copy()
        rng = np.random.default_rng(8)
        tcn.train(model, rng.standard_normal((20, 3)), rng.standard_normal((20, 2)))
        np.testing.assert_array_equal(model.params, before)


class TestPredictAndForecast:
    def test_zero_horizon_is_empty(self):
        model = tcn.init_model(tiny_config(output_shape=(2,)))
        out = tcn.forecast(model, np.zeros((5, 3)), 0)
        assert out.shape == (0, 2)

    def test_one_step_equals_forward_tail(self):
        cfg = tiny_config(output_shape=(2,))
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(9)
        x = rng.standard_normal((9, 3))
        pred = tcn.predict(model, x)
        np.testing.assert_array_equal(pred, tcn.forward(model, x)[-1])
        fc = tcn.forecast(model, x, 1)
        np.testing.assert_array_equal(fc[0], pred)

    def test_forecast_output_shape_metadata(self):
        cfg = tcn.TcnConfig(input_width=4, output_width=6, channels=(4,),
                            kernel_size=2, dilations=(1,), output_shape=(2, 3),
                            patience=None)
        model = tcn.init_model(cfg)
        out = tcn.forecast(model, np.zeros((7, 4)), 3)
        assert out.shape == (3, 2, 3)

    def test_prediction_tensor_orientation(self):
        # Reshaping back to tensor form must invert the per-step flattening
        # convention (index 0 fastest), not numpy's default C order.
        from factorcast.tensor_ops import unvectorize

        cfg = tcn.TcnConfig(input_width=4, output_width=6, channels=(4,),
                            kernel_size=2, dilations=(1,), output_shape=(2, 3),
                            patience=None)
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(12)
        x = rng.standard_normal((7, 4))
        flat_last = tcn.forward(model, x)[-1]
        pred = tcn.predict(model, x)
        np.testing.assert_array_equal(pred, unvectorize(flat_last, (2, 3)))

    def test_lagged_predict_agrees_with_forecast_tail(self):
        cfg = tiny_config(input_width=5, use_lagged_response=True,
                          output_shape=(2,), seed=3)
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(14)
        factors = rng.standard_normal((12, 3))
        known = rng.standard_normal((9, 2))
        fc = tcn.forecast(model, factors, 3, known_responses=known)
        np.testing.assert_array_equal(fc[-1], tcn.predict(model, factors, known))

    def test_recursive_forecast_prefix_consistency(self):
        cfg = tiny_config(input_width=5, use_lagged_response=True,
                          output_shape=(2,))
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(10)
        factors = rng.standard_normal((10, 3))
        known = rng.standard_normal((8, 2))
        two = tcn.forecast(model, factors, 2, known_responses=known)
        one = tcn.forecast(model, factors[:9], 1, known_responses=known)
        np.testing.assert_array_equal(two[0], one[0])

    def test_nonfinite_forecast_fails_loudly(self):
        model = tcn.init_model(tiny_config())
        x = np.zeros((6, 3))
        x[4, 0] = np.nan
        with pytest.raises(NumericalError):
            tcn.forecast(model, x, 2)


class TestCheckpoint:
    def test_roundtrip_byte_exact(self):
        cfg = tiny_config(channels=(5, 5), dilations=(1, 2), kernel_size=3,
                          output_shape=(2,))
        model = tcn.init_model(cfg)
        rng = np.random.default_rng(11)
        trained, _ = tcn.train(
            tcn.init_model(tiny_config(epochs=5)),
            rng.standard_normal((15, 3)), rng.standard_normal((15, 2)),
        )
        for m in (model, trained):
            blob = tcn.model_to_bytes(m)
            back = tcn.model_from_bytes(blob)
            assert tcn.model_to_bytes(back) == blob
            np.testing.assert_array_equal(back.params, m.params)
            x = rng.standard_normal((8, 3))
            np.testing.assert_array_equal(tcn.forward(back, x), tcn.forward(m, x))

    def test_file_roundtrip(self, tmp_path):
        model = tcn.init_model(tiny_config())
        path = tmp_path / "model.ftcn"
        tcn.save_checkpoint(path, model)
        back = tcn.load_checkpoint(path)
        assert tcn.model_to_bytes(back) == tcn.model_to_bytes(model)
