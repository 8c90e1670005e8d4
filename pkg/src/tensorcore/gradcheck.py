"""
有限差分梯度检查
"""

import logging
from typing import Callable, Sequence

import numpy as np

from tensorcore.tensor import Tape, Tensor, precision

logger = logging.getLogger(__name__)


def grad_check(builder: Callable[..., Tensor], leaves: Sequence[Tensor], eps: float = 1e-4) -> float:
    """
    比较解析梯度与中心差分数值梯度

    :param builder: 由叶子 Tensor 构造标量 loss 的函数
    :param leaves: 叶子 Tensor (float64)
    :param eps: 差分步长
    :return: 所有叶子元素上 |解析 - 数值| / max(1, |数值|) 的最大值
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    for leaf in leaves:
        if leaf.data.dtype != np.float64:
            raise ValueError(f"grad_check needs float64 leaves, got {leaf.data.dtype} for {leaf.name or 'leaf'}")

    with precision(np.float64):
        for leaf in leaves:
            leaf.requires_grad = True
            leaf.grad = None

        with Tape() as tape:
            loss = builder(*leaves)
        if tape.nodes and loss._tape is tape:
            tape.backward(loss)

        worst = 0.0
        for leaf in leaves:
            analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
            flat = leaf.data.reshape(-1)
            flat_grad = analytic.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + eps
                plus = builder(*leaves).item()
                flat[i] = original - eps
                minus = builder(*leaves).item()
                flat[i] = original
                numeric = (plus - minus) / (2 * eps)
                err = abs(flat_grad[i] - numeric) / max(1.0, abs(numeric))
                worst = max(worst, float(err))

    logger.debug(f"梯度检查完成: max relative error = {worst:.3e}")
    return worst
