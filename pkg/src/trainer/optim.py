"""
带动量的 SGD, 可选 Nesterov; 解耦权重衰减只作用于权重 (ndim > 1), 不作用于偏置
"""

from typing import Dict, List, Sequence

import numpy as np

from tensorcore import Tensor


class SGD:

    def __init__(self, params: Sequence[Tensor], momentum: float = 0.9, weight_decay: float = 0.0,
                 nesterov: bool = False):
        self.params: List[Tensor] = list(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.nesterov = nesterov
        self._velocity: Dict[int, np.ndarray] = {}

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self, lr: float):
        """
        v = momentum * v + grad
        w -= lr * (grad + momentum * v)   (Nesterov)
        w -= lr * v                       (否则)
        w -= lr * wd * w_old              (解耦权重衰减, 仅权重, 不进入动量)

        :param lr: 本步学习率
        """
        for p in self.params:
            if p.grad is None:
                continue
            dtype = p.data.dtype.type
            g = p.grad.astype(p.data.dtype, copy=True)
            decay = None
            if self.weight_decay and p.ndim > 1:
                decay = dtype(lr) * dtype(self.weight_decay) * p.data
            key = id(p)
            v = self._velocity.get(key)
            v = g.copy() if v is None else dtype(self.momentum) * v + g
            self._velocity[key] = v
            update = g + dtype(self.momentum) * v if self.nesterov else v
            p.data -= dtype(lr) * update
            if decay is not None:
                p.data -= decay
