"""
线性 hinge-loss 分类器 (线性 SVM), 小批量 SGD 训练
"""

from dataclasses import dataclass

import numpy as np

from augment.rng import make_rng
from tensorcore import Tape, Tensor
from tensorcore import ops
from trainer.optim import SGD


class ProbeError(ValueError):
    """探针训练集退化 (特征全部相同, 划分为空)"""


@dataclass
class LinearProbe:
    weight: np.ndarray
    bias: float
    mean: np.ndarray
    std: np.ndarray

    def scores(self, features: np.ndarray) -> np.ndarray:
        x = (np.asarray(features, dtype=np.float64) - self.mean) / self.std
        return x @ self.weight + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        return (self.scores(features) > 0).astype(np.int64)

    def error(self, features: np.ndarray, labels) -> float:
        labels = np.asarray(labels, dtype=np.int64)
        if len(labels) == 0:
            raise ProbeError("cannot measure probe error on an empty set")
        return float((self.predict(features) != labels).mean())


def _hinge(x: Tensor, y: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    scores = ops.add(ops.matmul(x, weight), bias)
    margins = ops.add(ops.scale(ops.mul(scores, y), -1.0), Tensor(1.0))
    return ops.mean(ops.relu(margins))


def fit_linear_probe(features: np.ndarray, labels, lr: float = 0.001, epochs: int = 50, seed: int = 0,
                     batch_size: int = 64, momentum: float = 0.9, l2: float = 1e-4) -> LinearProbe:
    """
    在标准化特征上训练二分类线性 SVM

    :param features: (N, D)
    :param labels: (N,), 取值 0/1
    :param lr: 固定学习率
    :param epochs: 训练轮数
    :param seed: 打乱顺序的种子
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) == 0:
        raise ProbeError("probe training set is empty")
    if np.ptp(features, axis=0).max() == 0:
        raise ProbeError(f"degenerate probe set: all {len(features)} feature vectors are identical")
    if lr <= 0 or epochs < 1:
        raise ProbeError(f"probe needs lr > 0 and epochs >= 1, got lr={lr} epochs={epochs}")

    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std == 0] = 1.0
    x_all = ((features - mean) / std).astype(np.float32)
    y_all = np.where(labels == 1, 1.0, -1.0).astype(np.float32)[:, None]

    weight = Tensor(np.zeros((features.shape[1], 1)), requires_grad=True, name="probe.weight")
    bias = Tensor(np.zeros((1,)), requires_grad=True, name="probe.bias")
    optimizer = SGD([weight, bias], momentum=momentum, weight_decay=l2)
    for epoch in range(epochs):
        order = make_rng(seed, "probe", epoch).permutation(len(x_all))
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            optimizer.zero_grad()
            with Tape() as tape:
                loss = _hinge(Tensor(x_all[idx]), Tensor(y_all[idx]), weight, bias)
            tape.backward(loss)
            optimizer.step(lr)

    return LinearProbe(weight=weight.data.astype(np.float64).reshape(-1), bias=float(bias.data[0]),
                       mean=mean, std=std)
