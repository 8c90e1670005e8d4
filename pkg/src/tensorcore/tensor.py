"""
自动微分核心: Tensor 与 Tape
每个训练步骤创建一条 Tape, 反向传播结束后丢弃
"""

import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

_DEFAULT_DTYPE = np.float32
_ACTIVE_TAPES: List["Tape"] = []


class ShapeError(ValueError):
    """算子输入形状不兼容"""


class UnknownOpError(KeyError):
    """未注册的算子类型"""


class BackwardError(RuntimeError):
    """反向传播前置条件不满足"""


class NumericalError(RuntimeError):
    """调试模式下检测到 NaN/Inf"""


def default_dtype() -> type:
    return _DEFAULT_DTYPE


@contextmanager
def precision(dtype) -> Iterator[None]:
    """
    临时切换默认浮点精度 (梯度检查使用 float64)

    :param dtype: np.float32 或 np.float64
    """
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype: {dtype}")
    previous = _DEFAULT_DTYPE
    _DEFAULT_DTYPE = dtype
    try:
        yield
    finally:
        _DEFAULT_DTYPE = previous


def debug_checks_enabled() -> bool:
    return os.getenv("CRMATCH_DEBUG", "0") == "1"


class Tensor:
    """行优先的 n 维数组, 参与 Tape 记录"""

    __slots__ = ("data", "requires_grad", "grad", "name", "is_leaf", "_tape")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=_DEFAULT_DTYPE, copy=True)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.is_leaf = True
        self._tape: Optional["Tape"] = None

    @classmethod
    def _from_op(cls, data: np.ndarray, requires_grad: bool, tape: Optional["Tape"]) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = requires_grad
        out.grad = None
        out.name = None
        out.is_leaf = not requires_grad
        out._tape = tape
        return out

    @classmethod
    def wrap(cls, data: np.ndarray, requires_grad: bool = False, name: Optional[str] = None) -> "Tensor":
        """保持 dtype 地包装已有数组 (不复制)"""
        out = cls._from_op(np.asarray(data), False, None)
        out.requires_grad = requires_grad
        out.name = name
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """返回不参与梯度的副本"""
        out = Tensor.__new__(Tensor)
        out.data = self.data.copy()
        out.requires_grad = False
        out.grad = None
        out.name = self.name
        out.is_leaf = True
        out._tape = None
        return out

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"<Tensor shape={self.shape} dtype={self.data.dtype}{tag} requires_grad={self.requires_grad}>"


@dataclass
class Node:
    """Tape 上的一条算子记录"""
    kind: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Tape:
    """按拓扑顺序记录的算子列表"""
    nodes: List[Node] = field(default_factory=list)

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _ACTIVE_TAPES.remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: Node):
        self.nodes.append(node)

    def backward(self, loss: Tensor):
        """
        从标量 loss 反向遍历, 累加所有可达叶子的梯度

        :param loss: 标量 Tensor
        """
        if loss.size != 1:
            raise BackwardError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.nodes:
            raise BackwardError("tape is empty")

        grads = {id(loss): np.ones_like(loss.data)}
        leaves = {}
        for node in reversed(self.nodes):
            g_out = grads.pop(id(node.output), None)
            if g_out is None:
                continue
            input_grads = node.backward(g_out)
            for tensor, g in zip(node.inputs, input_grads):
                if g is None or not tensor.requires_grad:
                    continue
                if g.shape != tensor.shape:
                    raise ShapeError(
                        f"{node.kind}: gradient shape {g.shape} does not match input shape {tensor.shape}")
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + g
                else:
                    grads[key] = g
                if tensor.is_leaf:
                    leaves[key] = tensor

        for key, leaf in leaves.items():
            g = grads.get(key)
            if g is None:
                continue
            g = g.astype(leaf.data.dtype, copy=False)
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
        logger.debug(f"反向传播完成: {len(self.nodes)} 个算子, {len(leaves)} 个叶子")


def active_tape() -> Optional[Tape]:
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


@contextmanager
def no_grad() -> Iterator[None]:
    """暂停记录 (评估与探针使用)"""
    saved = list(_ACTIVE_TAPES)
    _ACTIVE_TAPES.clear()
    try:
        yield
    finally:
        _ACTIVE_TAPES.extend(saved)


def backward(loss: Tensor):
    """
    对标量 loss 执行反向传播

    :param loss: 由 Tape 记录产生的标量
    """
    if loss.size != 1:
        raise BackwardError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._tape is None:
        if loss.is_leaf and loss.requires_grad:
            g = np.ones_like(loss.data)
            loss.grad = g if loss.grad is None else loss.grad + g
            return
        raise BackwardError("loss was not recorded on any tape")
    loss._tape.backward(loss)


def zero_grads(tensors):
    for t in tensors:
        t.grad = None
