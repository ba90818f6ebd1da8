"""Core numerics: forward/backward, losses, Adam, dropout, penalties.

Expected values come from independent oracles: entry-by-entry scalar
loops, central finite differences, and hand-computed single steps.
"""

import numpy as np
import pytest

from perturbnet import nn
from perturbnet.errors import NumericError


def scalar_dense_forward(W, b, X, activation):
    """Entry-by-entry oracle for activation(X @ W.T + b)."""
    n, out = X.shape[0], W.shape[0]
    Y = np.zeros((n, out))
    for i in range(n):
        for j in range(out):
            z = b[j]
            for k in range(W.shape[1]):
                z += X[i, k] * W[j, k]
            if activation == "relu":
                Y[i, j] = max(z, 0.0)
            elif activation == "sigmoid":
                Y[i, j] = 1.0 / (1.0 + np.exp(-z))
            else:
                Y[i, j] = z
    return Y


def finite_diff_grads(layers, X, target, loss_kind, h=1e-5):
    """Central finite differences through the forward-only loss path."""
    def loss_at():
        out = nn.forward(layers, X)
        if loss_kind == "mse":
            return nn.mse_loss(target, out)[0]
        if loss_kind == "bce":
            return nn.bce_loss(target, out)[0]
        return nn.ce_loss(target, out)[0]

    grads = []
    for layer in layers:
        dW = np.zeros_like(layer.W)
        for idx in np.ndindex(layer.W.shape):
            orig = layer.W[idx]
            layer.W[idx] = orig + h
            up = loss_at()
            layer.W[idx] = orig - h
            down = loss_at()
            layer.W[idx] = orig
            dW[idx] = (up - down) / (2 * h)
        db = np.zeros_like(layer.b)
        for j in range(layer.b.size):
            orig = layer.b[j]
            layer.b[j] = orig + h
            up = loss_at()
            layer.b[j] = orig - h
            down = loss_at()
            layer.b[j] = orig
            db[j] = (up - down) / (2 * h)
        grads.append((dW, db))
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4):
    for (aW, ab), (nW, nb) in zip(analytic, numeric):
        for a, b in ((aW, nW), (ab, nb)):
            denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)
            assert (np.abs(a - b) / denom).max() < rtol


def make_layer(out_dim, in_dim, activation, seed=0, scale=0.5):
    rng = np.random.default_rng(seed)
    layer = nn.init_layer(out_dim, in_dim, activation, rng)
    layer.W = rng.normal(0, scale, size=(out_dim, in_dim))
    layer.b = rng.normal(0, scale, size=out_dim)
    return layer


class TestDenseForward:
    def test_identity_map(self):
        layer = nn.LayerState(
            W=np.array([[1.0, 0.0], [0.0, 1.0]]), b=np.zeros(2),
            activation="linear", mask=np.ones((2, 2)))
        out = nn.dense_forward(layer, np.array([[3.0, 4.0]]))
        np.testing.assert_array_equal(out, [[3.0, 4.0]])

    def test_sigmoid_of_zero(self):
        layer = nn.LayerState(
            W=np.zeros((1, 2)), b=np.zeros(1), activation="sigmoid", mask=np.ones((1, 2)))
        out = nn.dense_forward(layer, np.array([[5.0, -7.0]]))
        np.testing.assert_array_equal(out, [[0.5]])

    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(42)
        W = rng.normal(size=(3, 4))
        b = rng.normal(size=3)
        X = rng.normal(size=(2, 4))
        layer = nn.LayerState(W=W, b=b, activation="relu", mask=np.ones((3, 4)))
        expected = scalar_dense_forward(W, b, X, "relu")
        np.testing.assert_allclose(nn.dense_forward(layer, X), expected, atol=1e-12)

    def test_shape_mismatch_names_shapes(self):
        layer = make_layer(3, 4, "relu")
        with pytest.raises(ValueError, match=r"\(2, 5\).*\(3, 4\)"):
            nn.dense_forward(layer, np.zeros((2, 5)))

    def test_softmax_rows_sum_to_one(self):
        layer = make_layer(5, 3, "softmax", seed=1, scale=2.0)
        out = nn.dense_forward(layer, np.random.default_rng(2).normal(size=(8, 3)))
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert (out > 0).all()

    def test_sigmoid_outputs_in_open_interval(self):
        layer = make_layer(4, 3, "sigmoid", seed=3, scale=3.0)
        out = nn.dense_forward(layer, np.random.default_rng(4).normal(size=(16, 3)))
        assert (out > 0).all() and (out < 1).all()


class TestActivationGrad:
    def test_sigmoid_at_half(self):
        np.testing.assert_array_equal(
            nn.activation_grad("sigmoid", np.array([[0.5]])), [[0.25]])

    def test_relu_inactive(self):
        np.testing.assert_array_equal(nn.activation_grad("relu", np.array([[0.0]])), [[0.0]])

    def test_sigmoid_hand_value(self):
        # 0.88 * 0.12 = 0.1056
        np.testing.assert_allclose(
            nn.activation_grad("sigmoid", np.array([[0.88]])), [[0.1056]], atol=1e-12)

    def test_linear_is_one(self):
        np.testing.assert_array_equal(
            nn.activation_grad("linear", np.array([[-3.0, 7.0]])), [[1.0, 1.0]])

    def test_softmax_rejected(self):
        with pytest.raises(ValueError, match="fused"):
            nn.activation_grad("softmax", np.array([[0.5, 0.5]]))


class TestLosses:
    def test_mse_perfect_reconstruction(self):
        X = np.random.default_rng(0).normal(size=(4, 3))
        loss, grad = nn.mse_loss(X, X.copy())
        assert loss == 0.0
        np.testing.assert_array_equal(grad, np.zeros_like(X))

    def test_mse_single_unit_error(self):
        loss, _ = nn.mse_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]]))
        assert loss == 1.0  # sum over features, mean over the 1-sample batch

    def test_mse_matches_scalar_loop(self):
        rng = np.random.default_rng(7)
        X, Xhat = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        total = 0.0
        for i in range(5):
            for j in range(3):
                total += (X[i, j] - Xhat[i, j]) ** 2
        loss, grad = nn.mse_loss(X, Xhat)
        assert abs(loss - total / 5) < 1e-12
        np.testing.assert_allclose(grad, 2 * (Xhat - X) / 5, atol=1e-12)

    def test_mse_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            nn.mse_loss(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_bce_confident_correct(self):
        loss, _ = nn.bce_loss(np.array([1.0]), np.array([1.0 - 1e-9]))
        assert loss < 1e-6

    def test_bce_at_half_is_ln2(self):
        loss, _ = nn.bce_loss(np.array([1.0]), np.array([0.5]))
        assert abs(loss - np.log(2)) < 1e-12

    def test_bce_matches_scalar_oracle(self):
        y = np.array([1.0, 0.0, 1.0, 0.0])
        p = np.array([0.9, 0.2, 0.6, 0.4])
        expected = -sum(
            yi * np.log(pi) + (1 - yi) * np.log(1 - pi) for yi, pi in zip(y, p)
        ) / 4
        loss, _ = nn.bce_loss(y, p)
        assert abs(loss - expected) < 1e-10

    def test_bce_rejects_bad_labels(self):
        with pytest.raises(ValueError, match="0, 1"):
            nn.bce_loss(np.array([2.0]), np.array([0.5]))

    def test_ce_matches_scalar_oracle(self):
        Y = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        P = np.array([[0.7, 0.2, 0.1], [0.1, 0.3, 0.6]])
        expected = -(np.log(0.7) + np.log(0.6)) / 2
        loss, grad = nn.ce_loss(Y, P)
        assert abs(loss - expected) < 1e-10
        np.testing.assert_allclose(grad, (P - Y) / 2, atol=1e-12)

    def test_ce_rejects_non_one_hot(self):
        with pytest.raises(ValueError, match="one-hot"):
            nn.ce_loss(np.array([[1.0, 1.0]]), np.array([[0.5, 0.5]]))


class TestBackward:
    def test_one_layer_linear_mse_closed_form(self):
        layer = make_layer(2, 3, "linear", seed=5)
        x = np.random.default_rng(6).normal(size=(1, 3))
        target = np.random.default_rng(7).normal(size=(1, 2))
        out = nn.forward([layer], x)
        _, grads = nn.backward([layer], x, target, "mse")
        expected_dW = (2 * (out - target)).T @ x
        np.testing.assert_allclose(grads[0][0], expected_dW, atol=1e-12)
        np.testing.assert_allclose(grads[0][1], (2 * (out - target)).ravel(), atol=1e-12)

    def test_three_layer_sigmoid_mse_vs_finite_diff(self):
        rng = np.random.default_rng(11)
        layers = [make_layer(4, 5, "sigmoid", 11), make_layer(3, 4, "sigmoid", 12), make_layer(5, 3, "sigmoid", 13)]
        X = rng.normal(size=(4, 5))
        target = rng.uniform(0.2, 0.8, size=(4, 5))
        _, analytic = nn.backward(layers, X, target, "mse")
        numeric = finite_diff_grads(layers, X, target, "mse")
        assert_grads_close(analytic, numeric)

    def test_zero_weight_autoencoder_on_zero_input(self):
        layers = [
            nn.LayerState(W=np.zeros((3, 2)), b=np.zeros(3), activation="sigmoid", mask=np.ones((3, 2))),
            nn.LayerState(W=np.zeros((2, 3)), b=np.zeros(2), activation="sigmoid", mask=np.ones((2, 3))),
        ]
        X = np.zeros((2, 2))
        _, grads = nn.backward(layers, X, X, "mse")
        # encoder sees zero input and a zero decoder weight above it: both
        # its gradients vanish by symmetry
        np.testing.assert_array_equal(grads[0][0], np.zeros((3, 2)))
        np.testing.assert_array_equal(grads[0][1], np.zeros(3))
        # decoder: out = sigmoid(0) = 0.5 vs target 0, hidden = 0.5, so
        # dZ = (2*0.5/n)*0.25 = 0.125 per entry; dW = sum_i dZ*0.5 = 0.125,
        # db = sum_i dZ = 0.25
        np.testing.assert_allclose(grads[1][0], np.full((2, 3), 0.125), atol=1e-12)
        np.testing.assert_allclose(grads[1][1], np.full(2, 0.25), atol=1e-12)

    def test_ce_requires_softmax(self):
        layers = [make_layer(3, 4, "sigmoid")]
        with pytest.raises(ValueError, match="softmax"):
            nn.backward(layers, np.zeros((2, 4)), np.eye(3)[:2], "ce")

    def test_masked_weights_still_get_gradients(self):
        rng = np.random.default_rng(21)
        layers = [make_layer(3, 4, "sigmoid", 21), make_layer(4, 3, "linear", 22)]
        layers[0].mask[0, 0] = 0.0
        layers[0].W[0, 0] = 0.0  # pruned position
        X = rng.normal(size=(3, 4))
        target = rng.normal(size=(3, 4))
        _, analytic = nn.backward(layers, X, target, "mse")
        numeric = finite_diff_grads(layers, X, target, "mse")
        assert abs(numeric[0][0][0, 0]) > 1e-6  # oracle says gradient flows
        assert_grads_close(analytic, numeric)

    def test_dropout_masks_enter_gradient(self):
        rng = np.random.default_rng(31)
        layers = [make_layer(4, 3, "relu", 31), make_layer(3, 4, "linear", 32)]
        X = rng.normal(size=(5, 3))
        target = rng.normal(size=(5, 3))
        dmask = nn.dropout_mask((5, 4), 0.4, np.random.default_rng(33))
        masks = [dmask, None]

        def loss_with_dropout():
            pre, post = nn.forward_pass(layers, X, masks)
            return nn.mse_loss(target, post[-1])[0]

        _, analytic = nn.backward(layers, X, target, "mse", masks)
        h = 1e-6
        layer = layers[0]
        for idx in [(0, 0), (2, 1), (3, 2)]:
            orig = layer.W[idx]
            layer.W[idx] = orig + h
            up = loss_with_dropout()
            layer.W[idx] = orig - h
            down = loss_with_dropout()
            layer.W[idx] = orig
            numeric = (up - down) / (2 * h)
            assert abs(analytic[0][0][idx] - numeric) < 1e-5


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        layer = make_layer(2, 2, "linear", seed=40)
        W0, b0 = layer.W.copy(), layer.b.copy()
        nn.adam_step(layer, np.zeros((2, 2)), np.zeros(2), nn.AdamConfig())
        np.testing.assert_array_equal(layer.W, W0)
        np.testing.assert_array_equal(layer.b, b0)
        assert layer.step_count == 1

    def test_first_step_hand_computed(self):
        # lr=1e-3, g=2: m_hat=g, v_hat=g^2, delta = -lr*g/(|g|+eps)
        layer = nn.LayerState(W=np.array([[1.0]]), b=np.zeros(1), activation="linear", mask=np.ones((1, 1)))
        cfg = nn.AdamConfig(learning_rate=1e-3)
        nn.adam_step(layer, np.array([[2.0]]), np.zeros(1), cfg)
        expected = 1.0 - 1e-3 * 2.0 / (2.0 + 1e-8)
        assert abs(layer.W[0, 0] - expected) < 1e-15

    def test_two_steps_match_scalar_oracle(self):
        g = 0.7
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        w, m, v = 0.3, 0.0, 0.0
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            w -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
        layer = nn.LayerState(W=np.array([[0.3]]), b=np.zeros(1), activation="linear", mask=np.ones((1, 1)))
        cfg = nn.AdamConfig()
        nn.adam_step(layer, np.array([[g]]), np.zeros(1), cfg)
        nn.adam_step(layer, np.array([[g]]), np.zeros(1), cfg)
        assert abs(layer.W[0, 0] - w) < 1e-12

    def test_zero_weight_decay_never_reads_weights(self):
        small = nn.LayerState(W=np.array([[0.01]]), b=np.zeros(1), activation="linear", mask=np.ones((1, 1)))
        large = nn.LayerState(W=np.array([[100.0]]), b=np.zeros(1), activation="linear", mask=np.ones((1, 1)))
        g = np.array([[0.5]])
        nn.adam_step(small, g, np.zeros(1), nn.AdamConfig())
        nn.adam_step(large, g, np.zeros(1), nn.AdamConfig())
        # identical deltas up to ulp(100); any decay coupling would differ at ~1e-5
        assert abs((small.W[0, 0] - 0.01) - (large.W[0, 0] - 100.0)) < 1e-12

    def test_nonfinite_gradient_names_layer(self):
        layer = make_layer(2, 2, "linear", seed=41)
        with pytest.raises(NumericError, match="layer 3"):
            nn.adam_step(layer, np.full((2, 2), np.nan), np.zeros(2), nn.AdamConfig(), layer_index=3)


class TestDropout:
    def test_rate_zero_all_ones(self):
        mask = nn.dropout_mask((4, 4), 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(mask, np.ones((4, 4)))

    def test_zero_fraction_near_rate(self):
        mask = nn.dropout_mask((100, 100), 0.2, np.random.default_rng(123))
        frac = (mask == 0).mean()
        assert 0.18 <= frac <= 0.22
        survivors = mask[mask != 0]
        np.testing.assert_allclose(survivors, 1.25)

    def test_same_seed_same_mask(self):
        a = nn.dropout_mask((10, 10), 0.3, np.random.default_rng(9))
        b = nn.dropout_mask((10, 10), 0.3, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_rate_one_rejected(self):
        with pytest.raises(ValueError):
            nn.dropout_mask((2, 2), 1.0, np.random.default_rng(0))


class TestRegPenalty:
    def test_lambda_zero(self):
        layers = [make_layer(2, 3, "relu", seed=50)]
        penalty, grads = nn.reg_penalty(layers, "L2", 0.0)
        assert penalty == 0.0
        np.testing.assert_array_equal(grads[0], np.zeros((2, 3)))

    def test_l2_single_weight(self):
        layer = nn.LayerState(W=np.array([[3.0]]), b=np.zeros(1), activation="linear", mask=np.ones((1, 1)))
        penalty, grads = nn.reg_penalty([layer], "L2", 0.1)
        assert abs(penalty - 0.9) < 1e-12
        assert abs(grads[0][0, 0] - 0.6) < 1e-12

    def test_l1_single_weight(self):
        layer = nn.LayerState(W=np.array([[-2.0]]), b=np.zeros(1), activation="linear", mask=np.ones((1, 1)))
        penalty, grads = nn.reg_penalty([layer], "L1", 0.5)
        assert abs(penalty - 1.0) < 1e-12
        assert abs(grads[0][0, 0] - (-0.5)) < 1e-12


class TestGradCheckAllLosses:
    """Randomized networks (<=4 layers, <=64 weights) against finite
    differences, one configuration per loss kind."""

    def test_mse_deep(self):
        rng = np.random.default_rng(60)
        layers = [make_layer(4, 3, "relu", 61), make_layer(2, 4, "sigmoid", 62), make_layer(3, 2, "linear", 63)]
        X = rng.normal(size=(6, 3))
        target = rng.normal(size=(6, 3))
        _, analytic = nn.backward(layers, X, target, "mse")
        assert_grads_close(analytic, finite_diff_grads(layers, X, target, "mse"))

    def test_bce_head(self):
        rng = np.random.default_rng(70)
        layers = [make_layer(4, 5, "relu", 71), make_layer(1, 4, "sigmoid", 72)]
        X = rng.normal(size=(8, 5))
        target = rng.integers(0, 2, size=(8, 1)).astype(np.float64)
        _, analytic = nn.backward(layers, X, target, "bce")
        assert_grads_close(analytic, finite_diff_grads(layers, X, target, "bce"))

    def test_ce_head(self):
        rng = np.random.default_rng(80)
        layers = [make_layer(5, 4, "relu", 81), make_layer(3, 5, "softmax", 82)]
        X = rng.normal(size=(7, 4))
        labels = rng.integers(0, 3, size=7)
        target = np.eye(3)[labels]
        _, analytic = nn.backward(layers, X, target, "ce")
        assert_grads_close(analytic, finite_diff_grads(layers, X, target, "ce"))
