import numpy as np
import pytest

from dualspace import neural_kit as nk


def test_init_is_deterministic():
    spec = nk.deep10_spec(seed=5)
    a, b = nk.init_net(spec), nk.init_net(spec)
    for wa, wb in zip(a.weight_arrays(), b.weight_arrays()):
        np.testing.assert_array_equal(wa, wb)


def test_dense_shapes():
    net = nk.init_net(nk.NetSpec((nk.Dense(16, 1),), "tanh", 0))
    weights, bias = net.weight_arrays()
    assert weights.shape == (16, 1)
    assert bias.shape == (1,)


def test_shape_mismatch_names_layer():
    spec = nk.NetSpec((nk.Dense(16, 8), nk.Dense(4, 1)), "relu", 0)
    with pytest.raises(ValueError, match="layer 2"):
        nk.init_net(spec)


def test_output_must_be_scalar():
    with pytest.raises(ValueError, match="scalar"):
        nk.init_net(nk.NetSpec((nk.Dense(4, 3),), "relu", 0))


def test_training_reduces_loss_on_linear_problem():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((60, 4))
    y = x @ np.array([1.0, -2.0, 0.5, 3.0])
    net = nk.init_net(nk.NetSpec((nk.Dense(4, 1),), "linear", 1))
    trained = nk.train(net, x, y, rounds=100, learning_rate=0.1)
    assert trained.loss_curve[-1] < trained.loss_curve[0]
    assert len(trained.loss_curve) == 100


def test_zero_rounds_rejected():
    net = nk.init_net(nk.NetSpec((nk.Dense(2, 1),), "linear", 0))
    with pytest.raises(ValueError, match="rounds"):
        nk.train(net, np.zeros((3, 2)), np.zeros(3), rounds=0, learning_rate=0.1)


def test_planted_linear_map_recovered():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((100, 16))
    w_true = rng.standard_normal(16)
    y = x @ w_true
    net = nk.init_net(nk.NetSpec((nk.Dense(16, 1),), "linear", 2))
    trained = nk.train(net, x, y, rounds=500, learning_rate=0.4)
    w_closed, *_ = np.linalg.lstsq(np.column_stack([x, np.ones(100)]), y, rcond=None)
    got = trained.weight_arrays()[0][:, 0]
    np.testing.assert_allclose(got, w_closed[:16], atol=1e-3)
    np.testing.assert_allclose(got, w_true, atol=1e-3)


def test_zero_weights_output_bias():
    net = nk.init_net(nk.NetSpec((nk.Dense(3, 1),), "linear", 0))
    weights, bias = net.weight_arrays()
    weights[:] = 0.0
    bias[:] = 1.25
    assert nk.predict(net, np.array([5.0, -2.0, 3.0])) == pytest.approx(1.25)


def test_identity_dense_passthrough():
    net = nk.init_net(nk.NetSpec((nk.Dense(1, 1),), "linear", 0))
    weights, bias = net.weight_arrays()
    weights[:] = 1.0
    bias[:] = 0.0
    assert nk.predict(net, np.array([0.73])) == pytest.approx(0.73)


def test_predict_shape_check():
    net = nk.init_net(nk.shallow_spec())
    with pytest.raises(ValueError, match="shape"):
        nk.predict(net, np.zeros(5))


def test_dense_forward_matches_manual_oracle():
    spec = nk.NetSpec((nk.Dense(6, 4), nk.Dense(4, 1)), "tanh", 9)
    net = nk.init_net(spec)
    (w1, b1), (w2, b2) = [net.ops[i].params() for i in (0, 2)]
    rng = np.random.default_rng(3)
    x = rng.standard_normal(6)
    manual = float((np.tanh(x @ w1[1] + b1[1]) @ w2[1] + b2[1])[0])
    assert nk.predict(net, x) == pytest.approx(manual, abs=1e-12)


def test_cnn_forward_matches_loop_oracle():
    spec = nk.cnn7_spec(input_shape=(12, 12), hidden=5, seed=4)
    net = nk.init_net(spec)
    rng = np.random.default_rng(5)
    x = rng.standard_normal((12, 12))

    def conv(img, weights, bias):  # img (c, h, w), weights (o, c, kh, kw)
        o, c, kh, kw = weights.shape
        h, w = img.shape[1] - kh + 1, img.shape[2] - kw + 1
        out = np.zeros((o, h, w))
        for f in range(o):
            for i in range(h):
                for j in range(w):
                    out[f, i, j] = (img[:, i:i + kh, j:j + kw] * weights[f]).sum() + bias[f]
        return out

    def pool(img):
        c, h, w = img.shape
        out = np.zeros((c, h // 2, w // 2))
        for f in range(c):
            for i in range(h // 2):
                for j in range(w // 2):
                    out[f, i, j] = img[f, 2 * i:2 * i + 2, 2 * j:2 * j + 2].max()
        return out

    arrs = net.weight_arrays()
    a = np.maximum(conv(x[None], arrs[0], arrs[1]), 0.0)
    a = pool(a)
    a = np.maximum(conv(a, arrs[2], arrs[3]), 0.0)
    a = pool(a)
    a = np.maximum(a.reshape(-1) @ arrs[4] + arrs[5], 0.0)
    manual = float((a @ arrs[6] + arrs[7])[0])
    assert nk.predict(net, x) == pytest.approx(manual, abs=1e-10)


@pytest.mark.parametrize("activation", ["tanh", "logit"])
def test_grad_check_smooth_activations(activation):
    rng = np.random.default_rng(6)
    spec = nk.NetSpec((nk.Dense(5, 7), nk.Dense(7, 1)), activation, 7)
    net = nk.init_net(spec)
    x = rng.standard_normal((4, 5))
    y = rng.standard_normal(4)
    assert nk.grad_check(net, x, y, epsilon=1e-5) < 1e-4


def test_grad_check_relu_excluding_kinks():
    rng = np.random.default_rng(8)
    spec = nk.NetSpec((nk.Dense(5, 7), nk.Dense(7, 1)), "relu", 8)
    net = nk.init_net(spec)
    x = rng.standard_normal((4, 5))
    y = rng.standard_normal(4)
    assert nk.grad_check(net, x, y, epsilon=1e-5) < 1e-4


def test_grad_check_small_cnn():
    spec = nk.NetSpec((nk.Conv2D((3, 3), 2), nk.Pool((2, 2)), nk.Flatten(),
                       nk.Dense(2 * 3 * 3, 1)),
                      "tanh", 9, input_shape=(8, 8))
    net = nk.init_net(spec)
    rng = np.random.default_rng(10)
    x = rng.standard_normal((2, 8, 8))
    y = rng.standard_normal(2)
    assert nk.grad_check(net, x, y, epsilon=1e-5) < 1e-4


def test_zero_net_zero_input_has_zero_gradients():
    net = nk.init_net(nk.NetSpec((nk.Dense(3, 1),), "linear", 0))
    for arr in net.weight_arrays():
        arr[:] = 0.0
    x = np.zeros((2, 3))
    out = nk.forward_batch(net, x)
    np.testing.assert_array_equal(out, 0.0)
    grad = (2.0 * (out - 0.0) / 2)[:, None]
    for op in reversed(net.ops):
        grad = op.backward(grad)
    dense = net.ops[0]
    np.testing.assert_array_equal(dense.d_weights, 0.0)
    np.testing.assert_array_equal(dense.d_bias, 0.0)


def test_divergence_aborts_with_round_number():
    rng = np.random.default_rng(11)
    net = nk.init_net(nk.NetSpec((nk.Dense(4, 1),), "linear", 12))
    x = rng.standard_normal((8, 4)) * 10
    y = rng.standard_normal(8)
    with pytest.raises(nk.TrainingDivergedError, match="round"):
        nk.train(net, x, y, rounds=200, learning_rate=1e6)


def test_training_is_pure_and_deterministic():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((20, 4))
    y = rng.standard_normal(20)
    net = nk.init_net(nk.shallow_spec(n_inputs=4, seed=3))
    before = [arr.copy() for arr in net.weight_arrays()]
    t1 = nk.train(net, x, y, rounds=50, learning_rate=0.05)
    t2 = nk.train(net, x, y, rounds=50, learning_rate=0.05)
    for arr, orig in zip(net.weight_arrays(), before):
        np.testing.assert_array_equal(arr, orig)  # input net untouched
    for a, b in zip(t1.weight_arrays(), t2.weight_arrays()):
        np.testing.assert_array_equal(a, b)
    assert t1.loss_curve == t2.loss_curve


def test_target_scaling_scales_linear_net_predictions():
    # zero-initialized pure-linear net: gradient descent iterates are
    # linear in the targets, so scaling targets scales predictions
    rng = np.random.default_rng(14)
    x = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    for c in (2.0, -3.0):
        nets = []
        for targets in (y, c * y):
            net = nk.init_net(nk.NetSpec((nk.Dense(5, 1),), "linear", 1))
            for arr in net.weight_arrays():
                arr[:] = 0.0
            nets.append(nk.train(net, x, targets, rounds=120, learning_rate=0.05))
        base = nk.forward_batch(nets[0], x)
        scaled = nk.forward_batch(nets[1], x)
        np.testing.assert_allclose(scaled, c * base, rtol=1e-9, atol=1e-12)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(15)
    x = rng.standard_normal((10, 4))
    y = rng.standard_normal(10)
    net = nk.train(nk.init_net(nk.shallow_spec(n_inputs=4, seed=6)), x, y,
                   rounds=30, learning_rate=0.05)
    prefix = str(tmp_path / "net")
    nk.save_net(net, prefix)
    back = nk.load_net(prefix)
    np.testing.assert_array_equal(nk.forward_batch(back, x), nk.forward_batch(net, x))
    assert back.loss_curve == net.loss_curve


def test_default_architectures_compose():
    assert len(nk.deep10_spec().layers) == 10
    assert len(nk.cnn7_spec().layers) == 7
    for spec in (nk.deep10_spec(), nk.cnn7_spec(), nk.shallow_spec()):
        nk.init_net(spec)  # shape walk succeeds


def test_loss_curve_csv_export():
    import io
    rng = np.random.default_rng(20)
    net = nk.train(nk.init_net(nk.NetSpec((nk.Dense(3, 1),), "linear", 0)),
                   rng.standard_normal((8, 3)), rng.standard_normal(8),
                   rounds=5, learning_rate=0.05)
    buf = io.StringIO()
    nk.write_loss_csv(net, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "round,mse"
    assert len(lines) == 6
    assert float(lines[1].split(",")[1]) == net.loss_curve[0]
