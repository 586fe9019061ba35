"""Tensor-engine unit tests: primitives, backward semantics, gradient checks."""

import numpy as np
import pytest

from genforge import tensor as T
from genforge.errors import DomainError, ShapeError
from genforge.tensor import Tensor, adam_step, AdamState, backward, grad_check


def rand_tensor(rng, shape, requires_grad=True, kink_margin=0.0):
    data = rng.normal(size=shape)
    if kink_margin:
        # push values away from 0 so leaky-ReLU kinks don't spoil FD checks
        data = np.where(np.abs(data) < kink_margin, kink_margin, data)
    return Tensor(data, requires_grad=requires_grad)


class TestMatmul:
    def test_identity(self):
        b = Tensor(np.arange(9.0).reshape(3, 3))
        out = T.matmul(Tensor(np.eye(3)), b)
        np.testing.assert_array_equal(out.data, b.data)

    def test_hand_summation(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[1.0], [1.0]])
        np.testing.assert_array_equal(T.matmul(a, b).data, [[3.0], [7.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_gradient(self):
        rng = np.random.default_rng(0)
        b = Tensor(rng.normal(size=(3, 2)))
        x = rand_tensor(rng, (4, 3))
        err = grad_check(lambda t: T.tsum(T.matmul(t, b)), x)
        assert err < 1e-6
        a = Tensor(rng.normal(size=(4, 3)))
        y = rand_tensor(rng, (3, 2))
        err = grad_check(lambda t: T.tsum(T.matmul(a, t)), y)
        assert err < 1e-6


class TestConv2d:
    def test_one_by_one_identity(self):
        x = Tensor(np.arange(18.0).reshape(2, 3, 3))
        k = Tensor(np.eye(2).reshape(2, 2, 1, 1))
        np.testing.assert_array_equal(T.conv2d(x, k, stride=1).data, x.data)

    def test_all_ones(self):
        x = Tensor(np.ones((1, 3, 3)))
        k = Tensor(np.ones((1, 1, 2, 2)))
        np.testing.assert_array_equal(T.conv2d(x, k).data, np.full((1, 2, 2), 4.0))

    def test_stride_shape(self):
        x = Tensor(np.zeros((1, 6, 6)))
        k = Tensor(np.zeros((1, 1, 2, 2)))
        assert T.conv2d(x, k, stride=2).shape == (1, 3, 3)

    def test_kernel_too_large(self):
        with pytest.raises(ShapeError):
            T.conv2d(Tensor(np.zeros((1, 3, 3))), Tensor(np.zeros((1, 1, 4, 4))))

    def test_batched_matches_single(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(3, 2, 6, 6))
        k = Tensor(rng.normal(size=(4, 2, 3, 3)))
        batched = T.conv2d(Tensor(x), k, stride=2).data
        for i in range(3):
            single = T.conv2d(Tensor(x[i]), k, stride=2).data
            np.testing.assert_allclose(batched[i], single, atol=1e-14)

    @pytest.mark.parametrize("stride", [1, 2])
    def test_gradients(self, stride):
        rng = np.random.default_rng(2)
        k = Tensor(rng.normal(size=(2, 1, 3, 3)))
        x = rand_tensor(rng, (1, 6, 6))
        assert grad_check(lambda t: T.tsum(T.conv2d(t, k, stride)), x) < 1e-6
        x2 = Tensor(rng.normal(size=(1, 6, 6)))
        kk = rand_tensor(rng, (2, 1, 3, 3))
        assert grad_check(lambda t: T.tsum(T.conv2d(x2, t, stride)), kk) < 1e-6


class TestShapeArithmetic:
    def test_conv_and_upsample_formulas(self):
        rng = np.random.default_rng(99)
        for h, w, kh, kw, stride in [
            (6, 6, 2, 2, 1), (6, 6, 2, 2, 2), (7, 9, 3, 4, 2),
            (16, 16, 4, 4, 2), (10, 8, 3, 3, 1), (5, 5, 5, 5, 1),
        ]:
            x = Tensor(rng.normal(size=(1, h, w)))
            k = Tensor(rng.normal(size=(2, 1, kh, kw)))
            out = T.conv2d(x, k, stride)
            assert out.shape == (2, (h - kh) // stride + 1, (w - kw) // stride + 1)
            for factor in (1, 2, 3):
                up = T.upsample_nn(out, factor)
                assert up.shape == (2, factor * out.shape[1], factor * out.shape[2])


class TestUpsample:
    def test_factor_one_identity(self):
        x = Tensor(np.arange(4.0).reshape(1, 2, 2))
        assert T.upsample_nn(x, 1) is x

    def test_blocks(self):
        x = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = T.upsample_nn(x, 2).data
        expected = np.array(
            [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]], dtype=float
        )
        np.testing.assert_array_equal(out, expected)

    def test_gradient(self):
        rng = np.random.default_rng(3)
        x = rand_tensor(rng, (2, 3, 3))
        w = Tensor(rng.normal(size=(2, 6, 6)))
        err = grad_check(lambda t: T.tsum(T.mul(T.upsample_nn(t, 2), w)), x)
        assert err < 1e-6


class TestLeakyRelu:
    def test_positive_identity(self):
        x = Tensor([0.0, 1.0, 5.0])
        np.testing.assert_array_equal(T.leaky_relu(x, 0.2).data, x.data)

    def test_negative_scaled(self):
        assert T.leaky_relu(Tensor([-1.0]), 0.2).data[0] == pytest.approx(-0.2)

    def test_bad_slope(self):
        with pytest.raises(DomainError):
            T.leaky_relu(Tensor([1.0]), slope=1.0)

    def test_gradient_away_from_kink(self):
        rng = np.random.default_rng(4)
        x = rand_tensor(rng, (5, 5), kink_margin=1e-3)
        err = grad_check(lambda t: T.tsum(T.leaky_relu(t, 0.2)), x)
        assert err < 1e-6


class TestChannelStats:
    def test_constant_channel(self):
        x = Tensor(np.full((2, 3, 3), 7.0))
        mu, sigma = T.channel_stats(x)
        np.testing.assert_allclose(mu.data, [7.0, 7.0])
        np.testing.assert_allclose(sigma.data, [T.EPS_STD, T.EPS_STD])

    def test_hand_computation(self):
        x = Tensor(np.array([0.0, 2.0]).reshape(1, 1, 2))
        mu, sigma = T.channel_stats(x)
        assert mu.data[0] == pytest.approx(1.0)
        assert sigma.data[0] == pytest.approx(1.0)

    def test_batched_shapes(self):
        x = Tensor(np.zeros((4, 3, 5, 5)))
        mu, sigma = T.channel_stats(x)
        assert mu.shape == (4, 3) and sigma.shape == (4, 3)

    def test_gradients(self):
        rng = np.random.default_rng(5)
        w_mu = Tensor(rng.normal(size=(2,)))
        w_sig = Tensor(rng.normal(size=(2,)))

        def f(t):
            mu, sigma = T.channel_stats(t)
            return T.add(T.tsum(T.mul(mu, w_mu)), T.tsum(T.mul(sigma, w_sig)))

        x = rand_tensor(rng, (2, 4, 4))
        assert grad_check(f, x) < 1e-5


class TestBackward:
    def test_sum_gives_ones(self):
        x = Tensor(np.ones((2, 3)), requires_grad=True)
        backward(T.tsum(x))
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_analytic_square(self):
        x = Tensor([1.0, -2.0], requires_grad=True)
        backward(T.tsum(T.mul(x, x)))
        np.testing.assert_allclose(x.grad, [2.0, -4.0])

    def test_accumulation_doubles(self):
        x = Tensor([3.0], requires_grad=True)
        loss = T.tsum(T.mul(x, x))
        backward(loss)
        first = x.grad.copy()
        x.zero_grad()
        loss2 = T.tsum(T.mul(x, x))
        backward(loss2)
        backward(loss2)
        np.testing.assert_allclose(x.grad, 2.0 * first)

    def test_non_scalar_rejected(self):
        with pytest.raises(ShapeError):
            backward(Tensor(np.ones(3), requires_grad=True))

    def test_linearity(self):
        rng = np.random.default_rng(6)
        data = rng.normal(size=(4,))
        a, b = 2.5, -1.25

        x = Tensor(data.copy(), requires_grad=True)
        loss1 = T.tsum(T.mul(x, x))
        loss2 = T.tsum(T.texp(x))
        backward(T.add(T.mul(Tensor(a), loss1), T.mul(Tensor(b), loss2)))
        combined = x.grad.copy()

        x1 = Tensor(data.copy(), requires_grad=True)
        backward(T.tsum(T.mul(x1, x1)))
        x2 = Tensor(data.copy(), requires_grad=True)
        backward(T.tsum(T.texp(x2)))
        np.testing.assert_allclose(combined, a * x1.grad + b * x2.grad, atol=1e-10)

    def test_reused_node_accumulates(self):
        x = Tensor([2.0], requires_grad=True)
        y = T.mul(x, x)
        loss = T.add(y, y)  # d/dx (2 x^2) = 4x
        backward(loss)
        np.testing.assert_allclose(x.grad, [8.0])


class TestGradCheck:
    def test_sum_of_squares(self):
        x = Tensor(np.array([0.5, -1.5, 2.0]))
        assert grad_check(lambda t: T.tsum(T.mul(t, t)), x) < 1e-8

    def test_conv_lrelu_composition(self):
        rng = np.random.default_rng(7)
        k = Tensor(rng.normal(size=(2, 1, 3, 3)))
        x = Tensor(rng.normal(size=(1, 5, 5)))

        def f(t):
            return T.tsum(T.leaky_relu(T.conv2d(t, k), 0.2))

        assert grad_check(f, x) < 1e-4

    def test_constant_function(self):
        x = Tensor(np.ones(3))
        assert grad_check(lambda t: T.tsum(T.mul(t, Tensor(np.zeros(3)))), x) == 0.0


class TestAdam:
    def test_zero_gradient_is_identity(self):
        p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
        state = AdamState([p])
        for _ in range(5):
            adam_step([p], [np.zeros(2)], state, lr=0.1)
        np.testing.assert_array_equal(p.data, [1.0, -2.0])
        assert state.step == 5

    def test_first_step_magnitude(self):
        # bias-corrected first step moves by ~lr for unit gradient
        p = Tensor(np.array([0.0]), requires_grad=True)
        state = AdamState([p])
        adam_step([p], [np.ones(1)], state, lr=0.1)
        assert p.data[0] == pytest.approx(-0.1, rel=1e-6)

    def test_constant_gradient_descends(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        state = AdamState([p])
        values = []
        for _ in range(10):
            adam_step([p], [np.ones(1)], state, lr=0.05)
            values.append(p.data[0])
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_shape_mismatch(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        with pytest.raises(ShapeError):
            adam_step([p], [np.zeros(3)], AdamState([p]), lr=0.1)


class TestPrimitiveGradSweep:
    """Every primitive passes an FD check on random inputs (margin 1e-3)."""

    def test_sweep(self):
        rng = np.random.default_rng(8)
        c_small = Tensor(rng.normal(size=(3, 4, 4)))
        c_big = Tensor(rng.normal(size=(3, 8, 8)))
        ones = Tensor(np.ones((3, 4, 4)))
        cases = {
            "add": lambda t: T.tsum(T.add(t, c_small)),
            "sub": lambda t: T.tsum(T.sub(c_small, t)),
            "mul": lambda t: T.tsum(T.mul(t, c_small)),
            "div": lambda t: T.tsum(T.div(c_small, T.add(T.mul(t, t), ones))),
            "exp": lambda t: T.tsum(T.texp(t)),
            "sqrt": lambda t: T.tsum(T.tsqrt(T.add(T.mul(t, t), ones))),
            "sigmoid": lambda t: T.tsum(T.sigmoid(t)),
            "mean": lambda t: T.tmean(T.mul(t, t)),
            "reshape": lambda t: T.tsum(T.mul(T.reshape(t, (-1,)), T.reshape(t, (-1,)))),
            "upsample": lambda t: T.tsum(T.mul(T.upsample_nn(t, 2), c_big)),
            "leaky_relu": lambda t: T.tsum(T.leaky_relu(t, 0.2)),
        }
        for name, f in cases.items():
            x = rand_tensor(rng, (3, 4, 4), kink_margin=1e-3)
            err = grad_check(f, x)
            assert err < 1e-4, f"{name}: rel err {err}"

    def test_log_gradient(self):
        rng = np.random.default_rng(9)
        x = Tensor(rng.uniform(0.5, 2.0, size=(4,)))
        assert grad_check(lambda t: T.tsum(T.tlog(t)), x) < 1e-6

    def test_log_domain(self):
        with pytest.raises(DomainError):
            T.tlog(Tensor([0.0]))

    def test_maximum_gradient_and_ties(self):
        rng = np.random.default_rng(10)
        other = Tensor(rng.normal(size=(4,)))
        x = Tensor(rng.normal(size=(4,)) + 2.0)  # clear of ties
        assert grad_check(lambda t: T.tsum(T.maximum(t, other)), x) < 1e-6
        # ties route gradient to the first argument
        a = Tensor([1.0], requires_grad=True)
        b = Tensor([1.0], requires_grad=True)
        backward(T.tsum(T.maximum(a, b)))
        assert a.grad[0] == 1.0 and (b.grad is None or b.grad[0] == 0.0)
