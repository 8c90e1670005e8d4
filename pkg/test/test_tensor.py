"""
自动微分核心测试
"""

import numpy as np
import pytest

from tensorcore import (
    BackwardError,
    NumericalError,
    ShapeError,
    Tape,
    Tensor,
    UnknownOpError,
    backward,
    forward_op,
    no_grad,
    precision,
)
from tensorcore import ops


def test_default_dtype_and_precision_switch():
    assert Tensor([1.0, 2.0]).data.dtype == np.float32
    with precision(np.float64):
        assert Tensor([1.0]).data.dtype == np.float64
    assert Tensor([1.0]).data.dtype == np.float32
    with pytest.raises(ValueError):
        with precision(np.int32):
            pass


def test_wrap_keeps_dtype_without_copy():
    arr = np.zeros(3, dtype=np.float64)
    t = Tensor.wrap(arr)
    assert t.data is arr
    assert t.data.dtype == np.float64


def test_unknown_op_kind():
    with pytest.raises(UnknownOpError):
        forward_op("no_such_op", [Tensor([1.0])])


def test_shape_errors():
    with pytest.raises(ShapeError):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((2,))))
    with pytest.raises(ShapeError):
        ops.log(Tensor([-1.0]))
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))


def test_backward_needs_scalar_recorded_loss():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with Tape():
        y = ops.relu(x)
    with pytest.raises(BackwardError):
        backward(y)
    with pytest.raises(BackwardError):
        backward(Tensor(1.0))


def test_gradients_accumulate_across_calls():
    x = Tensor(np.ones((2, 3)), requires_grad=True)
    for _ in range(2):
        with Tape():
            loss = ops.tsum(ops.add(x, x))
        backward(loss)
    np.testing.assert_array_equal(x.grad, np.full((2, 3), 4.0))


def test_shared_input_gradient_is_summed():
    x = Tensor([3.0], requires_grad=True)
    with Tape():
        loss = ops.tsum(ops.mul(x, x))
    backward(loss)
    assert x.grad[0] == pytest.approx(6.0)


def test_subgradient_at_zero():
    x = Tensor([0.0, 0.0], requires_grad=True)
    with Tape():
        loss = ops.tsum(ops.add(ops.relu(x), ops.sqrt(x)))
    backward(loss)
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


def test_log_floor_has_zero_gradient_below_floor():
    x = Tensor([0.0, 2.0], requires_grad=True)
    with Tape():
        loss = ops.tsum(ops.log(x, floor=1e-8))
    backward(loss)
    assert x.grad[0] == 0.0
    assert x.grad[1] == pytest.approx(0.5)


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with Tape() as tape:
        with no_grad():
            y = ops.exp(x)
    assert len(tape) == 0
    assert not y.requires_grad


def test_detached_input_gets_no_gradient():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape():
        loss = ops.tsum(ops.mul(x, x.detach()))
    backward(loss)
    np.testing.assert_allclose(x.grad, [1.0, 2.0])


def test_debug_mode_flags_overflow(monkeypatch):
    monkeypatch.setenv("CRMATCH_DEBUG", "1")
    with np.errstate(over="ignore"):
        with pytest.raises(NumericalError):
            ops.exp(Tensor([1000.0]))


def test_overflow_passes_silently_without_debug(monkeypatch):
    monkeypatch.delenv("CRMATCH_DEBUG", raising=False)
    with np.errstate(over="ignore"):
        out = ops.exp(Tensor([1000.0]))
    assert np.isinf(out.data[0])


def test_conv2d_values():
    x = Tensor(np.ones((1, 1, 4, 4)))
    w = Tensor(np.ones((1, 1, 3, 3)))
    out = ops.conv2d(x, w, pad=1).data
    assert out.shape == (1, 1, 4, 4)
    assert out[0, 0, 1, 1] == 9.0
    assert out[0, 0, 0, 0] == 4.0
    assert out[0, 0, 0, 1] == 6.0


def test_conv2d_stride_and_bias():
    x = Tensor(np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4))
    w = Tensor(np.full((1, 1, 2, 2), 0.25))
    b = Tensor([1.0])
    out = ops.conv2d(x, w, b, stride=2).data
    np.testing.assert_allclose(out[0, 0], [[3.5, 5.5], [11.5, 13.5]])


def test_global_avg_pool_and_flatten():
    x = Tensor(np.arange(24, dtype=np.float32).reshape(2, 3, 2, 2))
    pooled = ops.global_avg_pool(x).data
    assert pooled.shape == (2, 3)
    assert pooled[0, 0] == pytest.approx(1.5)
    assert ops.flatten(x).shape == (2, 12)


def test_reductions_without_axis_are_scalar():
    x = Tensor(np.ones((2, 3)))
    assert ops.tsum(x).shape == ()
    assert ops.mean(x).item() == pytest.approx(1.0)
    with pytest.raises(ShapeError):
        ops.mean(x, axis=2)


def test_log_softmax_and_l2_normalize():
    with precision(np.float64):
        z = Tensor([[1.0, 2.0, 3.0]])
        probs = np.exp(ops.log_softmax(z).data)
        assert probs.sum() == pytest.approx(1.0)
        v = ops.l2_normalize(Tensor([[3.0, 4.0]])).data
        np.testing.assert_allclose(v, [[0.6, 0.8]])


def test_take_rows_scatters_gradient_back():
    x = Tensor(np.arange(12.0).reshape(4, 3), requires_grad=True)
    with Tape():
        rows = ops.take_rows(x, [2, 0, 2])
        loss = ops.tsum(rows)
    np.testing.assert_array_equal(rows.data, [[6, 7, 8], [0, 1, 2], [6, 7, 8]])
    backward(loss)
    np.testing.assert_array_equal(x.grad, [[1, 1, 1], [0, 0, 0], [2, 2, 2], [0, 0, 0]])
    with pytest.raises(ShapeError):
        ops.take_rows(x, [4])
