"""
测试集 top-1 错误率
"""

import numpy as np

from model.network import ModelState
from tensorcore import no_grad


class EvaluationError(ValueError):
    """测试集为空或与标签不匹配"""


def predict(state: ModelState, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """分批前向, 返回预测类别"""
    out = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            logits = state.forward(images[start:start + batch_size]).logits.data
            out.append(logits.argmax(axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate(state: ModelState, images: np.ndarray, labels, batch_size: int = 256) -> float:
    """
    :param state: 原始参数或 EmaState.as_state()
    :param images: (N, 3, S, S)
    :param labels: (N,)
    :return: 错误率, [0, 1]
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) == 0:
        raise EvaluationError("cannot evaluate on an empty test set")
    if len(images) != len(labels):
        raise EvaluationError(f"{len(images)} test images but {len(labels)} labels")
    return float((predict(state, images, batch_size) != labels).mean())
