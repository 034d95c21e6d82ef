"""Tests for the tensor core: values, ops, convolutions and gradients."""

import threading

import numpy as np
import pytest

from conftest import GRAD_RTOL, check_op_gradients
from mssd.core.errors import ContractViolation, DimensionError, EmptyOutputError
from mssd.numcore import (
    AllocationTracker,
    GradTape,
    Tensor,
    active_tape,
    add,
    backward,
    concat,
    conv1d,
    conv1d_output_length,
    conv2d,
    dropout,
    gather,
    layer_norm,
    linear,
    matmul,
    mean,
    mse_loss,
    mul,
    pad_last,
    relu,
    reshape,
    scale,
    slice_last,
    softmax,
    split,
    sub,
    sum_all,
    transpose_last2,
)

pytestmark = pytest.mark.unit

N_INSTANCES = 50


def conv1d_oracle(x, w, b, stride, dilation, causal):
    c_out, c_in, k = w.shape
    if causal:
        x = np.pad(x, ((0, 0), ((k - 1) * dilation, 0)))
    length = x.shape[1]
    out_len = (length - dilation * (k - 1) - 1) // stride + 1
    out = np.zeros((c_out, out_len))
    for o in range(c_out):
        for t in range(out_len):
            acc = b[o]
            for c in range(c_in):
                for j in range(k):
                    acc += w[o, c, j] * x[c, t * stride + j * dilation]
            out[o, t] = acc
    return out


def conv2d_oracle(x, w, b):
    c_out, c_in, kh, kw = w.shape
    _, h, wd = x.shape
    out = np.zeros((c_out, h - kh + 1, wd - kw + 1))
    for o in range(c_out):
        for r in range(out.shape[1]):
            for s in range(out.shape[2]):
                acc = b[o]
                for c in range(c_in):
                    for i in range(kh):
                        for j in range(kw):
                            acc += w[o, c, i, j] * x[c, r + i, s + j]
                out[o, r, s] = acc
    return out


class TestTensor:
    def test_scalar_becomes_length_one(self):
        t = Tensor(3.0)
        assert t.shape == (1,)
        assert t.size == len(t.flat) == 1
        assert t.item() == 3.0

    def test_buffer_is_read_only(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0

    def test_zero_dimension_rejected(self):
        with pytest.raises(DimensionError):
            Tensor(np.zeros((0, 3)))

    def test_shape_matches_flat_buffer(self, rng):
        t = Tensor(rng.standard_normal((2, 3, 4)))
        assert int(np.prod(t.shape)) == t.flat.size
        assert t.data.dtype == np.float64

    def test_untracked_tensors_get_no_gradient(self):
        w = Tensor.parameter([1.0, 2.0])
        x = Tensor([3.0, 4.0])
        with GradTape() as tape:
            grads = backward(sum_all(mul(w, x)), tape)
        assert w in grads
        assert x not in grads


class TestConv1d:
    def test_causal_impulse_response(self):
        out = conv1d(Tensor([[0, 0, 1, 0, 0]]), Tensor([[[1, 1]]]), padding="causal")
        np.testing.assert_array_equal(out.data, [[0, 0, 1, 1, 0]])

    def test_valid_stride_compression_length(self):
        out = conv1d(Tensor(np.ones((1, 96))), Tensor(np.ones((1, 1, 3))), stride=3)
        assert out.shape == (1, 32)
        assert conv1d_output_length(96, 3, stride=3) == 32

    def test_dilated_causal_sum(self):
        x = Tensor([np.arange(1, 9, dtype=float)])
        out = conv1d(x, Tensor([[[1, 1]]]), dilation=4, padding="causal")
        np.testing.assert_array_equal(out.data, [[1, 2, 3, 4, 6, 8, 10, 12]])

    def test_causal_output_length_is_ceil(self):
        for length in range(1, 12):
            for stride in (1, 2, 3):
                out = conv1d(Tensor(np.ones((1, length))), Tensor(np.ones((1, 1, 2))), stride=stride, padding="causal")
                assert out.shape[-1] == -(-length // stride)

    def test_same_padding_preserves_length(self, rng):
        out = conv1d(Tensor(rng.standard_normal((2, 9))), Tensor(rng.standard_normal((3, 2, 3))), padding="same")
        assert out.shape == (3, 9)

    def test_matches_loop_oracle(self, rng):
        for _ in range(20):
            c_in, c_out, k = rng.integers(1, 4, size=3)
            stride, dilation = rng.integers(1, 4, size=2)
            causal = bool(rng.integers(0, 2))
            length = int(rng.integers(dilation * (k - 1) + 1, 16))
            x = rng.standard_normal((c_in, length))
            w = rng.standard_normal((c_out, c_in, k))
            b = rng.standard_normal(c_out)
            padding = "causal" if causal else "valid"
            out = conv1d(Tensor(x), Tensor(w), Tensor(b), stride=int(stride), dilation=int(dilation), padding=padding)
            np.testing.assert_allclose(out.data, conv1d_oracle(x, w, b, stride, dilation, causal), atol=1e-12)

    def test_batched_equals_per_sample(self, rng):
        x = rng.standard_normal((3, 2, 10))
        w = rng.standard_normal((4, 2, 3))
        batched = conv1d(Tensor(x), Tensor(w), stride=2, dilation=1, padding="causal").data
        for i in range(3):
            single = conv1d(Tensor(x[i]), Tensor(w), stride=2, padding="causal").data
            np.testing.assert_allclose(batched[i], single, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            conv1d(Tensor(np.ones((2, 5))), Tensor(np.ones((1, 3, 2))))

    def test_empty_output(self):
        with pytest.raises(EmptyOutputError):
            conv1d(Tensor(np.ones((1, 2))), Tensor(np.ones((1, 1, 3))))

    def test_causality_under_perturbation(self, rng):
        for stride in (1, 2, 3):
            x = rng.standard_normal((2, 15))
            w = rng.standard_normal((3, 2, 3))
            base = conv1d(Tensor(x), Tensor(w), stride=stride, dilation=2, padding="causal").data
            for t in range(15):
                bumped = x.copy()
                bumped[:, t] += 1.0
                out = conv1d(Tensor(bumped), Tensor(w), stride=stride, dilation=2, padding="causal").data
                earlier = [j for j in range(base.shape[1]) if j * stride < t]
                np.testing.assert_allclose(out[:, earlier], base[:, earlier], rtol=0, atol=1e-12)


class TestConv2d:
    def test_identity_kernel(self):
        x = np.ones((1, 3, 3))
        out = conv2d(Tensor(x), Tensor(np.ones((1, 1, 1, 1))))
        np.testing.assert_array_equal(out.data, x)

    def test_constant_field(self):
        out = conv2d(Tensor(np.ones((1, 4, 4))), Tensor(np.ones((1, 1, 2, 2))))
        np.testing.assert_array_equal(out.data, np.full((1, 3, 3), 4.0))

    def test_matches_loop_oracle(self, rng):
        x = rng.standard_normal((2, 5, 5))
        w = rng.standard_normal((3, 2, 2, 3))
        b = rng.standard_normal(3)
        out = conv2d(Tensor(x), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.data, conv2d_oracle(x, w, b), atol=1e-12)

    def test_same_padding_matches_padded_oracle(self, rng):
        x = rng.standard_normal((2, 4, 6))
        w = rng.standard_normal((2, 2, 3, 3))
        b = np.zeros(2)
        out = conv2d(Tensor(x), Tensor(w), Tensor(b), padding="same")
        expected = conv2d_oracle(np.pad(x, ((0, 0), (1, 1), (1, 1))), w, b)
        assert out.shape == (2, 4, 6)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            conv2d(Tensor(np.ones((2, 3, 3))), Tensor(np.ones((1, 1, 1, 1))))


class TestLinearAndNorm:
    def test_identity(self):
        out = linear(Tensor([1.0, 2.0, 3.0]), Tensor(np.eye(3)), Tensor(np.zeros(3)))
        np.testing.assert_array_equal(out.data, [1, 2, 3])

    def test_hand_arithmetic(self):
        out = linear(Tensor([3.0, 4.0]), Tensor([[2.0, 0.0], [0.0, 2.0]]), Tensor([1.0, 1.0]))
        np.testing.assert_array_equal(out.data, [7, 9])

    def test_matches_loop_oracle(self, rng):
        x, w, b = rng.standard_normal(8), rng.standard_normal((4, 8)), rng.standard_normal(4)
        expected = [sum(w[o, i] * x[i] for i in range(8)) + b[o] for o in range(4)]
        np.testing.assert_allclose(linear(Tensor(x), Tensor(w), Tensor(b)).data, expected, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            linear(Tensor(np.ones(3)), Tensor(np.ones((2, 4))))

    def test_layer_norm_constant_input_is_zero(self):
        out = layer_norm(Tensor(np.full((3, 5), 7.0)), Tensor(np.ones(3)), Tensor(np.zeros(3)))
        np.testing.assert_array_equal(out.data, np.zeros((3, 5)))

    def test_layer_norm_two_point(self):
        out = layer_norm(Tensor([[1.0], [3.0]]), eps=0.0)
        np.testing.assert_allclose(out.data, [[-1.0], [1.0]], atol=1e-12)

    def test_layer_norm_moments(self, rng):
        for _ in range(N_INSTANCES):
            out = layer_norm(Tensor(rng.standard_normal((4, 10))), eps=1e-12).data
            assert np.max(np.abs(out.mean(axis=0))) <= 1e-10
            np.testing.assert_allclose(out.var(axis=0), 1.0, rtol=0, atol=1e-6)

    def test_layer_norm_eps_shrinks_variance(self, rng):
        x = rng.standard_normal((4, 10))
        var = x.var(axis=0)
        out = layer_norm(Tensor(x)).data
        np.testing.assert_allclose(out.var(axis=0), var / (var + 1e-5), rtol=1e-10)


class TestShapeOps:
    def test_mse_loss_examples(self, rng):
        x = Tensor(rng.standard_normal(5))
        assert mse_loss(x, x).item() == 0.0
        assert mse_loss(Tensor([0.0, 0.0]), Tensor([1.0, 1.0])).item() == 1.0

    def test_reshape_preserves_row_major(self):
        x = Tensor(np.arange(12.0).reshape(2, 6))
        y = reshape(x, (3, 4))
        np.testing.assert_array_equal(y.flat, x.flat)
        np.testing.assert_array_equal(reshape(y, (2, 6)).data, x.data)

    def test_reshape_bad_size(self):
        with pytest.raises(DimensionError):
            reshape(Tensor(np.ones(6)), (4, 2))

    def test_concat_then_split_recovers(self, rng):
        parts = [Tensor(rng.standard_normal((2, n))) for n in (1, 3, 2)]
        joined = concat(parts, axis=1)
        for original, piece in zip(parts, split(joined, [1, 3, 2], axis=1)):
            np.testing.assert_array_equal(original.data, piece.data)

    def test_concat_mismatch(self):
        with pytest.raises(DimensionError):
            concat([Tensor(np.ones((2, 2))), Tensor(np.ones((3, 2)))], axis=1)

    def test_add_mismatch(self):
        with pytest.raises(DimensionError):
            add(Tensor(np.ones(2)), Tensor(np.ones(3)))

    def test_gather_per_row(self):
        x = Tensor([[10.0, 11.0, 12.0], [20.0, 21.0, 22.0]])
        out = gather(x, np.array([[2, 0], [1, 1]]))
        np.testing.assert_array_equal(out.data, [[12, 10], [21, 21]])

    def test_dropout_is_identity_in_eval(self, rng):
        x = Tensor(rng.standard_normal(10))
        assert dropout(x, 0.5, rng, training=False) is x


class TestBackward:
    def test_linear_gradient_is_input(self):
        w = Tensor.parameter([1.0, -2.0, 0.5])
        x = Tensor([3.0, 4.0, 5.0])
        with GradTape() as tape:
            grads = backward(sum_all(mul(w, x)), tape)
        np.testing.assert_array_equal(grads[w], [3.0, 4.0, 5.0])

    def test_non_scalar_loss_rejected(self):
        w = Tensor.parameter([1.0, 2.0])
        with GradTape() as tape:
            out = scale(w, 2.0)
            with pytest.raises(ContractViolation):
                backward(out, tape)

    def test_needs_a_tape(self):
        with pytest.raises(ContractViolation):
            backward(Tensor.parameter([1.0]))

    def test_tape_cleared_after_backward(self):
        w = Tensor.parameter([1.0, 2.0])
        with GradTape() as tape:
            loss = sum_all(mul(w, w))
            assert len(tape) > 0
            backward(loss, tape)
            assert len(tape) == 0

    def test_no_recording_without_tracked_inputs(self):
        with GradTape() as tape:
            add(Tensor([1.0]), Tensor([2.0]))
            assert len(tape) == 0

    def test_tapes_are_local_to_threads(self):
        seen = []

        def worker():
            seen.append(active_tape())

        with GradTape():
            thread = threading.Thread(target=worker)
            thread.start()
            thread.join()
        assert seen == [None]

    def test_allocation_tracker_counts_buffers(self):
        with AllocationTracker() as tracker:
            Tensor(np.zeros(8))
        assert tracker.allocated_bytes == 64
        assert tracker.buffer_count == 1


def _random_nonzero(rng, shape):
    """Values bounded away from zero, so ReLU kinks stay outside the FD step."""
    return rng.uniform(0.1, 1.0, size=shape) * rng.choice([-1.0, 1.0], size=shape)


def _dims(rng, count):
    return [int(d) for d in rng.integers(1, 5, size=count)]


OP_CASES = {
    "add": lambda rng, s: ((lambda a, b: sum_all(mul(add(a, b), add(a, b)))), [rng.standard_normal(s), rng.standard_normal(s)]),
    "sub": lambda rng, s: ((lambda a, b: sum_all(mul(sub(a, b), a))), [rng.standard_normal(s), rng.standard_normal(s)]),
    "mul": lambda rng, s: ((lambda a, b: sum_all(mul(a, b))), [rng.standard_normal(s), rng.standard_normal(s)]),
    "scale": lambda rng, s: ((lambda a: sum_all(mul(scale(a, -1.7), a))), [rng.standard_normal(s)]),
    "relu": lambda rng, s: ((lambda a: sum_all(mul(relu(a), relu(a)))), [_random_nonzero(rng, s)]),
    "mean": lambda rng, s: ((lambda a: mean(mul(a, a))), [rng.standard_normal(s)]),
    "mse_loss": lambda rng, s: ((lambda a, b: mse_loss(a, b)), [rng.standard_normal(s), rng.standard_normal(s)]),
    "softmax": lambda rng, s: ((lambda a: sum_all(mul(softmax(a), Tensor(np.arange(a.size, dtype=float).reshape(a.shape))))), [rng.standard_normal(s)]),
}


@pytest.mark.parametrize("name", sorted(OP_CASES))
def test_elementwise_gradients(name):
    rng = np.random.default_rng(sorted(OP_CASES).index(name))
    worst = 0.0
    for _ in range(N_INSTANCES):
        fn, arrays = OP_CASES[name](rng, tuple(_dims(rng, 2)))
        worst = max(worst, check_op_gradients(fn, arrays))
    assert worst < GRAD_RTOL


def test_shape_op_gradients():
    rng = np.random.default_rng(1)
    for _ in range(N_INSTANCES):
        rows, cols = _dims(rng, 2)
        target = rng.standard_normal((cols, rows))
        assert check_op_gradients(lambda a: mse_loss(reshape(a, (cols, rows)), target), [rng.standard_normal((rows, cols))]) < GRAD_RTOL
        assert check_op_gradients(lambda a: mse_loss(transpose_last2(a), target), [rng.standard_normal((rows, cols))]) < GRAD_RTOL
        weights = rng.standard_normal((rows, 2 * cols + 3))
        assert check_op_gradients(
            lambda a, b: sum_all(mul(pad_last(concat([a, b], axis=1), 1, 2), Tensor(weights))),
            [rng.standard_normal((rows, cols)), rng.standard_normal((rows, cols))],
        ) < GRAD_RTOL
        index = rng.integers(0, cols, size=(rows, 3))
        picks = rng.standard_normal((rows, 3))
        assert check_op_gradients(lambda a: sum_all(mul(gather(a, index), Tensor(picks))), [rng.standard_normal((rows, cols))]) < GRAD_RTOL
        if cols > 1:
            assert check_op_gradients(
                lambda a: sum_all(mul(slice_last(a, 1, cols), slice_last(a, 1, cols))), [rng.standard_normal((rows, cols))]
            ) < GRAD_RTOL


def test_linear_and_matmul_gradients():
    rng = np.random.default_rng(2)
    for _ in range(N_INSTANCES):
        batch, n_in, n_out = _dims(rng, 3)
        target = rng.standard_normal((batch, n_out))
        assert check_op_gradients(
            lambda x, w, b: mse_loss(linear(x, w, b), target),
            [rng.standard_normal((batch, n_in)), rng.standard_normal((n_out, n_in)), rng.standard_normal(n_out)],
        ) < GRAD_RTOL
        target = rng.standard_normal((2, batch, n_out))
        assert check_op_gradients(
            lambda a, b: mse_loss(matmul(a, b), target),
            [rng.standard_normal((2, batch, n_in)), rng.standard_normal((2, n_in, n_out))],
        ) < GRAD_RTOL


def test_layer_norm_gradients():
    rng = np.random.default_rng(3)
    for _ in range(N_INSTANCES):
        channels, length = int(rng.integers(3, 6)), int(rng.integers(1, 6))
        target = rng.standard_normal((channels, length))
        assert check_op_gradients(
            lambda x, g, b: mse_loss(layer_norm(x, g, b), target),
            [rng.standard_normal((channels, length)), rng.standard_normal(channels), rng.standard_normal(channels)],
        ) < GRAD_RTOL


def test_conv_gradients():
    rng = np.random.default_rng(4)
    for _ in range(N_INSTANCES):
        c_in, c_out, k = _dims(rng, 3)
        stride, dilation = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        padding = ["valid", "causal", "same"][int(rng.integers(0, 3))]
        if padding == "same":
            stride = 1
        length = dilation * (k - 1) + int(rng.integers(1, 6))
        out_len = conv1d_output_length(length, k, stride, dilation, padding)
        target = rng.standard_normal((c_out, out_len))
        assert check_op_gradients(
            lambda x, w, b: mse_loss(conv1d(x, w, b, stride=stride, dilation=dilation, padding=padding), target),
            [rng.standard_normal((c_in, length)), rng.standard_normal((c_out, c_in, k)), rng.standard_normal(c_out)],
        ) < GRAD_RTOL

        kh, kw = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        h, w = kh + int(rng.integers(0, 3)), kw + int(rng.integers(0, 3))
        padding2 = ["valid", "same"][int(rng.integers(0, 2))]
        out_shape = (c_out, h, w) if padding2 == "same" else (c_out, h - kh + 1, w - kw + 1)
        target2 = rng.standard_normal(out_shape)
        assert check_op_gradients(
            lambda x, wt, b: mse_loss(conv2d(x, wt, b, padding=padding2), target2),
            [rng.standard_normal((c_in, h, w)), rng.standard_normal((c_out, c_in, kh, kw)), rng.standard_normal(c_out)],
        ) < GRAD_RTOL


def test_composite_pipeline_gradient(rng):
    target = rng.standard_normal(3)

    def pipeline(x, w, b, lw, lb):
        h = relu(conv1d(x, w, b, dilation=2, padding="causal"))
        return mse_loss(linear(reshape(h, (-1,)), lw, lb), target)

    arrays = [
        rng.standard_normal((2, 6)),
        rng.standard_normal((2, 2, 2)),
        rng.uniform(2.0, 3.0, size=2),
        rng.standard_normal((3, 12)),
        rng.standard_normal(3),
    ]
    # positive bias and small inputs keep ReLU pre-activations away from zero
    arrays[0] *= 0.2
    arrays[1] *= 0.2
    assert check_op_gradients(pipeline, arrays) < GRAD_RTOL


@pytest.mark.parametrize("kernel", [2, 3])
@pytest.mark.parametrize("layers", [1, 2, 3, 4])
def test_receptive_field_of_causal_stack(kernel, layers):
    rng = np.random.default_rng(kernel * 10 + layers)
    length = 1 + (kernel - 1) * (2 ** layers - 1) + 8
    x = Tensor.parameter(rng.standard_normal((2, length)))
    weights = [Tensor(rng.uniform(0.5, 1.5, size=(2, 2, kernel))) for _ in range(layers)]
    with GradTape() as tape:
        h = x
        for layer, w in enumerate(weights):
            h = conv1d(h, w, dilation=2 ** layer, padding="causal")
        grads = backward(sum_all(slice_last(h, length - 1, length)), tape)
    support = np.flatnonzero(np.any(grads[x] != 0.0, axis=0))
    assert support.size == 1 + (kernel - 1) * (2 ** layers - 1)
    assert support.max() == length - 1
