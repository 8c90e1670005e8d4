"""
算子注册表
每个算子提供 forward(数组, 属性) 与 backward(上下文, 输出梯度) 两个规则
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from tensorcore.tensor import (
    NumericalError,
    ShapeError,
    Tensor,
    UnknownOpError,
    active_tape,
    debug_checks_enabled,
    Node,
)

logger = logging.getLogger(__name__)

ForwardFn = Callable[..., Tuple[np.ndarray, Any]]
BackwardFn = Callable[[Any, np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass(frozen=True)
class OpRule:
    """算子规则"""
    kind: str
    forward: ForwardFn
    backward: BackwardFn
    arity: int


OP_REGISTRY: Dict[str, OpRule] = {}


def register_op(kind: str, arity: int):
    def wrap(cls):
        OP_REGISTRY[kind] = OpRule(kind=kind, forward=cls.forward, backward=cls.backward, arity=arity)
        return cls
    return wrap


def forward_op(kind: str, inputs: Sequence[Tensor], **attrs) -> Tensor:
    """
    执行一个已注册算子, 如有输入需要梯度则记录到当前 Tape

    :param kind: 算子类型
    :param inputs: 输入 Tensor 列表
    :param attrs: 算子属性 (stride, pad, axis ...)
    :return: 输出 Tensor
    """
    rule = OP_REGISTRY.get(kind)
    if rule is None:
        raise UnknownOpError(f"unknown op kind: {kind}")
    if rule.arity >= 0 and len(inputs) != rule.arity:
        raise ShapeError(f"{kind}: expects {rule.arity} inputs, got {len(inputs)}")

    arrays = [t.data for t in inputs]
    out_data, ctx = rule.forward(*arrays, **attrs)
    out_data = np.asarray(out_data)
    if debug_checks_enabled() and not np.all(np.isfinite(out_data)):
        if all(np.all(np.isfinite(a)) for a in arrays):
            raise NumericalError(f"{kind}: non-finite output on finite inputs")

    tape = active_tape()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor._from_op(out_data, needs_grad, tape if needs_grad else None)
    if needs_grad:
        tape.record(Node(
            kind=kind,
            inputs=tuple(inputs),
            output=out,
            backward=lambda g, _ctx=ctx: rule.backward(_ctx, g),
        ))
    return out


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """把广播后的梯度规约回原始形状"""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_suffix_broadcast(kind: str, a: np.ndarray, b: np.ndarray):
    if b.ndim > a.ndim:
        raise ShapeError(f"{kind}: second operand has more dims {b.shape} than first {a.shape}")
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        shape = None
    if shape != a.shape:
        raise ShapeError(f"{kind}: cannot broadcast {b.shape} onto {a.shape}")


@register_op("matmul", 2)
class MatMul:
    @staticmethod
    def forward(a, b):
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul: incompatible dims {a.shape} @ {b.shape}")
        return a @ b, (a, b)

    @staticmethod
    def backward(ctx, g):
        a, b = ctx
        return g @ b.T, a.T @ g


@register_op("add", 2)
class Add:
    @staticmethod
    def forward(a, b):
        _check_suffix_broadcast("add", a, b)
        return a + b, (a.shape, b.shape)

    @staticmethod
    def backward(ctx, g):
        a_shape, b_shape = ctx
        return g, _unbroadcast(g, b_shape)


@register_op("mul", 2)
class Mul:
    @staticmethod
    def forward(a, b):
        _check_suffix_broadcast("mul", a, b)
        return a * b, (a, b)

    @staticmethod
    def backward(ctx, g):
        a, b = ctx
        return g * b, _unbroadcast(g * a, b.shape)


@register_op("scale", 1)
class Scale:
    @staticmethod
    def forward(a, factor: float = 1.0):
        factor = a.dtype.type(factor)
        return a * factor, factor

    @staticmethod
    def backward(ctx, g):
        return (g * ctx,)


@register_op("relu", 1)
class Relu:
    @staticmethod
    def forward(a):
        mask = a > 0
        return np.where(mask, a, a.dtype.type(0)), mask

    @staticmethod
    def backward(ctx, g):
        # 0 处的次梯度取 0
        return (np.where(ctx, g, g.dtype.type(0)),)


@register_op("exp", 1)
class Exp:
    @staticmethod
    def forward(a):
        out = np.exp(a)
        return out, out

    @staticmethod
    def backward(ctx, g):
        return (g * ctx,)


@register_op("log", 1)
class Log:
    @staticmethod
    def forward(a, floor: Optional[float] = None):
        if floor is None:
            if np.any(a <= 0):
                raise ShapeError("log: input must be strictly positive when no floor is given")
            return np.log(a), (a, None)
        keep = a >= floor
        return np.log(np.where(keep, a, a.dtype.type(floor))), (a, keep)

    @staticmethod
    def backward(ctx, g):
        a, keep = ctx
        if keep is None:
            return (g / a,)
        safe = np.where(keep, a, a.dtype.type(1))
        return (np.where(keep, g / safe, g.dtype.type(0)),)


@register_op("sqrt", 1)
class Sqrt:
    @staticmethod
    def forward(a):
        if np.any(a < 0):
            raise ShapeError("sqrt: negative input")
        out = np.sqrt(a)
        return out, out

    @staticmethod
    def backward(ctx, g):
        positive = ctx > 0
        safe = np.where(positive, ctx, ctx.dtype.type(1))
        # 0 处的次梯度取 0
        return (np.where(positive, g / (2 * safe), g.dtype.type(0)),)


@register_op("sum", 1)
class Sum:
    @staticmethod
    def forward(a, axis: Optional[int] = None):
        if axis is not None and not -a.ndim <= axis < a.ndim:
            raise ShapeError(f"sum: axis {axis} out of range for shape {a.shape}")
        return np.sum(a, axis=axis), (a.shape, axis)

    @staticmethod
    def backward(ctx, g):
        shape, axis = ctx
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)


@register_op("mean", 1)
class Mean:
    @staticmethod
    def forward(a, axis: Optional[int] = None):
        if axis is not None and not -a.ndim <= axis < a.ndim:
            raise ShapeError(f"mean: axis {axis} out of range for shape {a.shape}")
        if a.size == 0:
            raise ShapeError("mean: empty input")
        count = a.size if axis is None else a.shape[axis]
        return np.mean(a, axis=axis), (a.shape, axis, count)

    @staticmethod
    def backward(ctx, g):
        shape, axis, count = ctx
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / g.dtype.type(count), shape).copy(),)


@register_op("flatten", 1)
class Flatten:
    @staticmethod
    def forward(a, start_axis: int = 1):
        if a.ndim <= start_axis:
            raise ShapeError(f"flatten: shape {a.shape} has no axis {start_axis}")
        return a.reshape(a.shape[:start_axis] + (-1,)), a.shape

    @staticmethod
    def backward(ctx, g):
        return (g.reshape(ctx),)


@register_op("take_rows", 1)
class TakeRows:
    @staticmethod
    def forward(a, index=()):
        index = np.asarray(index, dtype=np.int64).reshape(-1)
        if a.ndim < 1 or (index.size and (index.min() < 0 or index.max() >= a.shape[0])):
            raise ShapeError(f"take_rows: index out of range for leading dim of {a.shape}")
        return a[index], (a.shape, index)

    @staticmethod
    def backward(ctx, g):
        shape, index = ctx
        out = np.zeros(shape, dtype=g.dtype)
        np.add.at(out, index, g)
        return (out,)


@register_op("global_avg_pool", 1)
class GlobalAvgPool:
    @staticmethod
    def forward(a):
        if a.ndim not in (3, 4):
            raise ShapeError(f"global_avg_pool: expects (C,H,W) or (N,C,H,W), got {a.shape}")
        return a.mean(axis=(-2, -1)), a.shape

    @staticmethod
    def backward(ctx, g):
        shape = ctx
        area = shape[-1] * shape[-2]
        g = (g / g.dtype.type(area))[..., None, None]
        return (np.broadcast_to(g, shape).copy(),)


@register_op("log_softmax", 1)
class LogSoftmax:
    @staticmethod
    def forward(a, axis: int = -1):
        shifted = a - a.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        return out, (out, axis)

    @staticmethod
    def backward(ctx, g):
        out, axis = ctx
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)


@register_op("l2_normalize", 1)
class L2Normalize:
    @staticmethod
    def forward(a, axis: int = -1, eps: float = 1e-12):
        norm = np.sqrt((a * a).sum(axis=axis, keepdims=True))
        norm = np.maximum(norm, a.dtype.type(eps))
        out = a / norm
        return out, (out, norm, axis)

    @staticmethod
    def backward(ctx, g):
        out, norm, axis = ctx
        return ((g - out * (g * out).sum(axis=axis, keepdims=True)) / norm,)


@register_op("conv2d", -1)
class Conv2d:
    """
    二维卷积 (N,C,H,W) * (O,C,k,k) [+ bias(O,)]
    使用 sliding_window_view 展开窗口, einsum 做收缩
    """

    @staticmethod
    def forward(x, w=None, b=None, stride: int = 1, pad: int = 0):
        if w is None:
            raise ShapeError("conv2d: expects 2 or 3 inputs (x, weight[, bias])")
        if x.ndim != 4 or w.ndim != 4:
            raise ShapeError(f"conv2d: expects input (N,C,H,W) and weight (O,C,k,k), got {x.shape} and {w.shape}")
        n, c, h, wd = x.shape
        o, c_w, kh, kw = w.shape
        if c != c_w:
            raise ShapeError(f"conv2d: input channels {c} != weight channels {c_w}")
        if b is not None and b.shape != (o,):
            raise ShapeError(f"conv2d: bias shape {b.shape} != ({o},)")
        if stride < 1 or pad < 0:
            raise ShapeError(f"conv2d: invalid stride={stride} pad={pad}")
        hp, wp = h + 2 * pad, wd + 2 * pad
        if hp < kh or wp < kw:
            raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input {hp}x{wp}")

        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        out = np.einsum("nchwij,ocij->nohw", windows, w, optimize=True)
        if b is not None:
            out = out + b[None, :, None, None]
        return out, (x.shape, w, windows, stride, pad, b is not None)

    @staticmethod
    def backward(ctx, g):
        x_shape, w, windows, stride, pad, has_bias = ctx
        n, c, h, wd = x_shape
        _, _, kh, kw = w.shape
        ho, wo = g.shape[2], g.shape[3]

        grad_w = np.einsum("nohw,nchwij->ocij", g, windows, optimize=True)
        grad_xp = np.zeros((n, c, h + 2 * pad, wd + 2 * pad), dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                grad_xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += np.einsum(
                    "nohw,oc->nchw", g, w[:, :, i, j], optimize=True)
        grad_x = grad_xp[:, :, pad:pad + h, pad:pad + wd] if pad else grad_xp
        grads = [np.ascontiguousarray(grad_x), grad_w]
        if has_bias:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads


# 便捷函数

def matmul(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("matmul", [a, b])


def add(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("add", [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("mul", [a, b])


def scale(a: Tensor, factor: float) -> Tensor:
    return forward_op("scale", [a], factor=factor)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def relu(a: Tensor) -> Tensor:
    return forward_op("relu", [a])


def exp(a: Tensor) -> Tensor:
    return forward_op("exp", [a])


def log(a: Tensor, floor: Optional[float] = None) -> Tensor:
    return forward_op("log", [a], floor=floor)


def sqrt(a: Tensor) -> Tensor:
    return forward_op("sqrt", [a])


def tsum(a: Tensor, axis: Optional[int] = None) -> Tensor:
    return forward_op("sum", [a], axis=axis)


def mean(a: Tensor, axis: Optional[int] = None) -> Tensor:
    return forward_op("mean", [a], axis=axis)


def flatten(a: Tensor, start_axis: int = 1) -> Tensor:
    return forward_op("flatten", [a], start_axis=start_axis)


def take_rows(a: Tensor, index: Sequence[int]) -> Tensor:
    """按第 0 维取行, 未选中的行不参与前向与梯度"""
    return forward_op("take_rows", [a], index=tuple(int(i) for i in index))


def global_avg_pool(a: Tensor) -> Tensor:
    return forward_op("global_avg_pool", [a])


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    return forward_op("log_softmax", [a], axis=axis)


def l2_normalize(a: Tensor, axis: int = -1) -> Tensor:
    return forward_op("l2_normalize", [a], axis=axis)


def conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None, stride: int = 1, pad: int = 0) -> Tensor:
    inputs = [x, w] if b is None else [x, w, b]
    return forward_op("conv2d", inputs, stride=stride, pad=pad)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    return exp(log_softmax(a, axis=axis))
