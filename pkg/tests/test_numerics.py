"""Numerics oracles: naive-loop references for conv/pool/dense, finite
differences for every backward pass, plus the SGD update contract."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xtamer.nn import (
    Conv2D,
    Dense,
    Flatten,
    L1Norm,
    L2Norm,
    MaxPool2,
    NonFiniteGradientError,
    Relu,
    ScaledTanh,
    Sequential,
    SoftmaxCrossEntropy,
    Tanh,
    apply_activation,
    conv2d_forward,
    dense_forward,
    l1_normalize,
    l2_normalize,
    maxpool2d,
    sgd_step,
)


def conv2d_loops(x, kernels, bias):
    """Six-nested-loop reference convolution (valid, stride 1)."""
    c_in, h, w = x.shape
    c_out, _, k, _ = kernels.shape
    out = np.zeros((c_out, h - k + 1, w - k + 1))
    for o in range(c_out):
        for i in range(h - k + 1):
            for j in range(w - k + 1):
                acc = 0.0
                for c in range(c_in):
                    for a in range(k):
                        for b in range(k):
                            acc += x[c, i + a, j + b] * kernels[o, c, a, b]
                out[o, i, j] = acc + bias[o]
    return out


def maxpool_loops(x):
    """Brute-force 2x2/2 windowed max."""
    c, h, w = x.shape
    out = np.zeros((c, h // 2, w // 2))
    for ch in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                out[ch, i, j] = x[ch, 2 * i:2 * i + 2, 2 * j:2 * j + 2].max()
    return out


class TestConv2d:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 8, 8))
        kernels = rng.normal(size=(2, 1, 3, 3))
        bias = rng.normal(size=2)
        got = conv2d_forward(x, kernels, bias)
        want = conv2d_loops(x, kernels, bias)
        assert got.shape == want.shape == (2, 6, 6)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_multichannel_matches_loop_oracle(self):
        rng = np.random.default_rng(8)
        x = rng.normal(size=(3, 7, 9))
        kernels = rng.normal(size=(4, 3, 3, 3))
        bias = rng.normal(size=4)
        np.testing.assert_allclose(
            conv2d_forward(x, kernels, bias), conv2d_loops(x, kernels, bias),
            rtol=0, atol=1e-12)

    def test_output_shape_64(self):
        out = conv2d_forward(np.zeros((1, 64, 64)), np.zeros((8, 1, 5, 5)), np.zeros(8))
        assert out.shape == (8, 60, 60)

    def test_zero_input_gives_bias(self):
        bias = np.array([1.5, -2.0])
        out = conv2d_forward(np.zeros((1, 6, 6)), np.ones((2, 1, 3, 3)), bias)
        assert (out[0] == 1.5).all() and (out[1] == -2.0).all()

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="channels"):
            conv2d_forward(np.zeros((2, 6, 6)), np.zeros((2, 1, 3, 3)), np.zeros(2))
        with pytest.raises(ValueError, match="larger than input"):
            conv2d_forward(np.zeros((1, 4, 4)), np.zeros((2, 1, 5, 5)), np.zeros(2))
        with pytest.raises(ValueError, match="bias"):
            conv2d_forward(np.zeros((1, 6, 6)), np.zeros((2, 1, 3, 3)), np.zeros(3))

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(2, 10, 10))
        k = rng.normal(size=(3, 2, 5, 5))
        b = rng.normal(size=3)
        a = conv2d_forward(x, k, b)
        assert (a == conv2d_forward(x, k, b)).all()


class TestMaxpool:
    def test_shape(self):
        out, idx = maxpool2d(np.zeros((8, 60, 60)))
        assert out.shape == (8, 30, 30) and idx.shape == (8, 30, 30)

    def test_simple_window(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out, _ = maxpool2d(x)
        assert out[0, 0, 0] == 4.0

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(1, 6, 6))
        out, _ = maxpool2d(x)
        np.testing.assert_array_equal(out, maxpool_loops(x))

    def test_odd_extent_rejected(self):
        with pytest.raises(ValueError, match="even"):
            maxpool2d(np.zeros((1, 5, 6)))

    def test_tie_goes_to_first_position(self):
        x = np.full((1, 2, 2), 3.0)
        _, idx = maxpool2d(x)
        assert idx[0, 0, 0] == 0


class TestDense:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.0])
        out = dense_forward(x, np.eye(3), np.zeros(3), "linear")
        np.testing.assert_array_equal(out, x)

    def test_matches_hand_computed(self):
        x = np.array([1.0, 2.0, 3.0])
        w = np.array([[0.5, -1.0, 2.0], [1.0, 1.0, 1.0]])
        b = np.array([0.25, -0.25])
        # Row dot products done by hand.
        want = np.array([0.5 - 2.0 + 6.0 + 0.25, 1.0 + 2.0 + 3.0 - 0.25])
        np.testing.assert_allclose(dense_forward(x, w, b), want, rtol=0, atol=1e-15)

    def test_scaled_tanh_range(self):
        rng = np.random.default_rng(3)
        x = rng.normal(scale=2.0, size=9)
        w = rng.normal(size=(4, 9))
        out = dense_forward(x, w, np.zeros(4), "scaled_tanh", scale=2.0)
        assert (np.abs(out) < 2.0).all()
        # Float64 tanh saturates to exactly 1 for huge inputs, so the open
        # bound weakens to a closed one there.
        far = dense_forward(np.full(2, 1e6), np.ones((1, 2)), np.zeros(1),
                            "scaled_tanh", scale=2.0)
        assert np.abs(far).max() <= 2.0

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            dense_forward(np.zeros(3), np.zeros((2, 4)), np.zeros(2))

    def test_unknown_activation_rejected(self):
        with pytest.raises(ValueError, match="activation"):
            apply_activation(np.zeros(2), "softplus")


class TestNormalize:
    # The epsilon guard in the denominator shifts results by about
    # eps * |s - 1| / s relative to the guard-free value (s = the norm), so
    # tolerances below are of order eps, not tighter.
    def test_l2_three_four_five(self):
        np.testing.assert_allclose(l2_normalize(np.array([3.0, 4.0])),
                                   [0.6, 0.8], rtol=0, atol=1e-8)

    def test_l1_example(self):
        np.testing.assert_allclose(l1_normalize(np.array([1.0, 1.0, 2.0])),
                                   [0.25, 0.25, 0.5], rtol=0, atol=1e-8)

    def test_zero_vector_total(self):
        for fn in (l1_normalize, l2_normalize):
            out = fn(np.zeros(5))
            assert np.isfinite(out).all() and (out == 0).all()

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=32))
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, values):
        v = np.asarray(values)
        for fn, norm in ((l1_normalize, np.abs(v).sum()),
                         (l2_normalize, np.sqrt((v * v).sum()))):
            if norm > 1e-3:
                once = fn(v)
                bound = 2e-8 * max(1.0, 1.0 / norm)
                assert np.abs(fn(once) - once).max() < bound


def finite_difference(net, x, upstream, h=1e-5):
    """Central-difference gradients of sum(forward(x) * upstream) for every
    parameter and for the input."""
    def loss():
        return float((net.forward(x) * upstream).sum())

    param_grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        flat_p, flat_g = p.ravel(), g.ravel()
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            hi = loss()
            flat_p[i] = orig - h
            lo = loss()
            flat_p[i] = orig
            flat_g[i] = (hi - lo) / (2 * h)
        param_grads.append(g)

    x_grad = np.zeros_like(x)
    flat_x, flat_g = x.ravel(), x_grad.ravel()
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        hi = loss()
        flat_x[i] = orig - h
        lo = loss()
        flat_x[i] = orig
        flat_g[i] = (hi - lo) / (2 * h)
    return param_grads, x_grad


def max_relative_error(analytic, numeric):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return np.abs(analytic - numeric).max() / scale


def conv_stack(rng):
    return Sequential([
        Conv2D(1, 2, 3, rng), Relu(), MaxPool2(), L1Norm(),
        Conv2D(2, 3, 2, rng), Relu(), MaxPool2(), L2Norm(),
        Flatten(), Dense(3, 2, rng),
    ])


def mlp_stack(rng):
    return Sequential([Dense(4, 5, rng), Tanh(), Dense(5, 3, rng), ScaledTanh(2.0)])


class TestBackward:
    @pytest.mark.parametrize("seed", range(5))
    def test_conv_stack_gradcheck(self, seed):
        rng = np.random.default_rng(seed)
        net = conv_stack(rng)
        # Offset keeps relu/pool inputs away from kinks, where central
        # differences are invalid.
        x = rng.normal(size=(2, 1, 8, 8)) + 0.05
        out = net.forward(x)
        upstream = rng.normal(size=out.shape)
        analytic = net.backward(upstream)
        fd_params, fd_x = finite_difference(net, x, upstream)
        for a, n in zip(net.gradients(), fd_params):
            assert max_relative_error(a, n) < 1e-4
        assert max_relative_error(analytic.input_grad, fd_x) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_centered_conv_stack_gradcheck(self, seed):
        # The encoder's production configuration: frozen biases, centered
        # kernels, rescaled first-layer init.
        rng = np.random.default_rng(300 + seed)
        net = Sequential([
            Conv2D(1, 2, 3, rng, train_bias=False, center_kernels=True,
                   init_scale=3.0),
            Relu(), MaxPool2(), L1Norm(),
            Conv2D(2, 3, 2, rng, train_bias=False, center_kernels=True),
            Relu(), MaxPool2(), L2Norm(),
            Flatten(), Dense(3, 2, rng),
        ])
        x = rng.uniform(0.05, 1.0, size=(2, 1, 8, 8))
        out = net.forward(x)
        upstream = rng.normal(size=out.shape)
        analytic = net.backward(upstream)
        fd_params, fd_x = finite_difference(net, x, upstream)
        for a, n in zip(net.gradients(), fd_params):
            assert max_relative_error(a, n) < 1e-4
        assert max_relative_error(analytic.input_grad, fd_x) < 1e-4

    @pytest.mark.parametrize("seed", range(5))
    def test_mlp_gradcheck(self, seed):
        rng = np.random.default_rng(100 + seed)
        net = mlp_stack(rng)
        x = rng.normal(size=(3, 4))
        out = net.forward(x)
        upstream = rng.normal(size=out.shape)
        analytic = net.backward(upstream)
        fd_params, fd_x = finite_difference(net, x, upstream)
        for a, n in zip(net.gradients(), fd_params):
            assert max_relative_error(a, n) < 1e-4
        assert max_relative_error(analytic.input_grad, fd_x) < 1e-4

    def test_linear_layer_squared_error_closed_form(self):
        rng = np.random.default_rng(5)
        net = Sequential([Dense(3, 1, rng)])
        x = rng.normal(size=(1, 3))
        y = 0.7
        pred = net.forward(x)
        # d/dW of (pred - y)^2 is 2(pred - y) x^T.
        net.backward(2.0 * (pred - y))
        d_w, d_b = net.gradients()
        np.testing.assert_allclose(d_w, 2.0 * (pred[0, 0] - y) * x, rtol=1e-12)
        np.testing.assert_allclose(d_b, [2.0 * (pred[0, 0] - y)], rtol=1e-12)

    def test_zero_upstream_zero_grads(self):
        rng = np.random.default_rng(6)
        net = conv_stack(rng)
        x = rng.normal(size=(1, 1, 8, 8))
        out = net.forward(x)
        net.backward(np.zeros_like(out))
        for g in net.gradients():
            assert (g == 0).all()

    def test_backward_before_forward_rejected(self):
        net = mlp_stack(np.random.default_rng(0))
        with pytest.raises(RuntimeError, match="before forward"):
            net.backward(np.zeros((1, 3)))

    def test_softmax_cross_entropy(self):
        rng = np.random.default_rng(9)
        logits = rng.normal(size=(4, 7))
        labels = np.array([0, 3, 6, 1])
        loss_fn = SoftmaxCrossEntropy()
        loss, probs = loss_fn.forward(logits, labels)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, rtol=0, atol=1e-9)
        assert loss > 0
        # Uniform logits: loss is exactly ln(n_classes).
        loss_u, _ = loss_fn.forward(np.zeros((2, 7)), np.array([0, 4]))
        np.testing.assert_allclose(loss_u, np.log(7), rtol=1e-12)

    def test_softmax_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(10)
        logits = rng.normal(size=(3, 5))
        labels = np.array([2, 0, 4])
        loss_fn = SoftmaxCrossEntropy()
        loss_fn.forward(logits, labels)
        analytic = loss_fn.backward()
        h = 1e-6
        numeric = np.zeros_like(logits)
        for i in range(logits.shape[0]):
            for j in range(logits.shape[1]):
                bumped = logits.copy()
                bumped[i, j] += h
                hi, _ = loss_fn.forward(bumped, labels)
                bumped[i, j] -= 2 * h
                lo, _ = loss_fn.forward(bumped, labels)
                numeric[i, j] = (hi - lo) / (2 * h)
        assert max_relative_error(analytic, numeric) < 1e-4


class TestFrozenBias:
    def test_untrainable_bias_excluded_and_untouched(self):
        rng = np.random.default_rng(4)
        conv = Conv2D(1, 2, 3, rng, train_bias=False)
        assert len(conv.params) == 1
        x = rng.normal(size=(1, 1, 6, 6))
        out = conv.forward(x)
        conv.backward(np.ones_like(out))
        assert len(conv.grads) == 1
        sgd_step(list(conv.params), list(conv.grads), 0.5)
        assert (conv.bias == 0).all()


class TestCenteredKernels:
    def test_constant_input_response_is_zero(self):
        rng = np.random.default_rng(7)
        conv = Conv2D(2, 3, 3, rng, center_kernels=True)
        # Break the DC-free init on purpose; centering must still hold.
        conv.kernels += 0.37
        x = np.full((1, 2, 6, 6), 0.9)
        out = conv.forward(x)
        np.testing.assert_allclose(out, 0.0, atol=1e-12)

    def test_effective_kernels_sum_to_zero(self):
        rng = np.random.default_rng(8)
        conv = Conv2D(1, 4, 5, rng, center_kernels=True)
        conv.kernels += rng.normal(size=(4, 1, 1, 1))  # arbitrary DC offsets
        eff = conv._effective_kernels()
        np.testing.assert_allclose(eff.sum(axis=(1, 2, 3)), 0.0, atol=1e-13)

    def test_sgd_preserves_zero_mean(self):
        rng = np.random.default_rng(9)
        conv = Conv2D(1, 2, 3, rng, train_bias=False, center_kernels=True)
        x = rng.uniform(0.0, 1.0, size=(2, 1, 6, 6))
        for _ in range(5):
            out = conv.forward(x)
            conv.backward(rng.normal(size=out.shape))
            sgd_step(list(conv.params), list(conv.grads), 0.3)
        np.testing.assert_allclose(
            conv.kernels.mean(axis=(1, 2, 3)), 0.0, atol=1e-15)

    def test_init_scale_multiplies_draw(self):
        base = Conv2D(1, 3, 5, np.random.default_rng(11))
        wide = Conv2D(1, 3, 5, np.random.default_rng(11), init_scale=3.0)
        np.testing.assert_allclose(wide.kernels, 3.0 * base.kernels, rtol=1e-12)

    def test_uncentered_default_matches_plain_correlation(self):
        rng = np.random.default_rng(12)
        conv = Conv2D(1, 2, 3, rng)
        x = rng.normal(size=(1, 1, 5, 5))
        from xtamer.nn import conv2d_batch
        np.testing.assert_array_equal(
            conv.forward(x), conv2d_batch(x, conv.kernels, conv.bias))


class TestSgdStep:
    def test_arithmetic(self):
        p = [np.array([1.0])]
        sgd_step(p, [np.array([2.0])], 0.1)
        np.testing.assert_allclose(p[0], [0.8], rtol=0, atol=1e-15)

    def test_zero_learning_rate_is_identity(self):
        p = [np.array([1.0, 2.0])]
        sgd_step(p, [np.array([5.0, -5.0])], 0.0)
        np.testing.assert_array_equal(p[0], [1.0, 2.0])

    def test_convex_quadratic_monotone(self):
        # f(p) = (p - 3)^2, gradient 2(p - 3); small steps must never increase f.
        p = np.array([10.0])
        last = (p[0] - 3.0) ** 2
        for _ in range(50):
            sgd_step([p], [2.0 * (p - 3.0)], 0.1)
            cur = (p[0] - 3.0) ** 2
            assert cur <= last
            last = cur

    def test_non_finite_gradient_refused_without_mutation(self):
        p = [np.array([1.0]), np.array([2.0])]
        g = [np.array([0.5]), np.array([np.nan])]
        with pytest.raises(NonFiniteGradientError):
            sgd_step(p, g, 0.1)
        assert p[0][0] == 1.0 and p[1][0] == 2.0

    def test_negative_learning_rate_rejected(self):
        with pytest.raises(ValueError, match="learning rate"):
            sgd_step([np.array([1.0])], [np.array([1.0])], -0.1)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            sgd_step([np.zeros(2)], [np.zeros(3)], 0.1)
