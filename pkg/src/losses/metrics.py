"""
特征距离 / 相似度度量注册表

前三个 (相似度) 最小化时拉远特征 -> 等变; 后三个 (距离) 最小化时拉近特征 -> 不变
所有度量沿最后一维计算, 输入为 (D,) 或 (B, D)
"""

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from tensorcore import Tensor
from tensorcore import ops

JS_LOG_FLOOR = 1e-8
LN2 = float(np.log(2.0))


class MetricError(ValueError):
    """度量输入错误"""


MetricFn = Callable[[Tensor, Tensor], Tensor]


@dataclass(frozen=True)
class DistanceMetric:
    name: str
    polarity: str  # "equivariance" | "invariance"
    fn: MetricFn

    def __call__(self, a: Tensor, b: Tensor) -> Tensor:
        return self.fn(a, b)


def _check_pair(a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise MetricError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.ndim not in (1, 2) or a.shape[-1] < 2:
        raise MetricError(f"metric inputs must be (D,) or (B,D) with D >= 2, got {a.shape}")


def _check_nonzero(*tensors: Tensor):
    for t in tensors:
        if np.any(np.linalg.norm(t.data, axis=-1) == 0):
            raise MetricError("cosine metric on a zero vector")


def _const(value: float, like: Tensor) -> Tensor:
    return Tensor.wrap(np.asarray(value, dtype=like.data.dtype))


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    _check_nonzero(a, b)
    return ops.tsum(ops.mul(ops.l2_normalize(a), ops.l2_normalize(b)), axis=-1)


def cosine_distance(a: Tensor, b: Tensor) -> Tensor:
    return ops.add(ops.scale(cosine_similarity(a, b), -1.0), _const(1.0, a))


def l2_similarity(a: Tensor, b: Tensor) -> Tensor:
    """-||a_hat - b_hat||, 值域 [-2, 0]"""
    diff = ops.sub(ops.l2_normalize(a), ops.l2_normalize(b))
    return ops.scale(ops.sqrt(ops.tsum(ops.mul(diff, diff), axis=-1)), -1.0)


def l2_distance(a: Tensor, b: Tensor) -> Tensor:
    """原始投影上的平方欧氏距离"""
    diff = ops.sub(a, b)
    return ops.tsum(ops.mul(diff, diff), axis=-1)


def js_divergence_dist(p: Tensor, q: Tensor) -> Tensor:
    """两个概率分布之间的 JS 散度 (自然对数)"""
    m = ops.scale(ops.add(p, q), 0.5)
    log_m = ops.log(m, floor=JS_LOG_FLOOR)
    kl_pm = ops.tsum(ops.mul(p, ops.sub(ops.log(p, floor=JS_LOG_FLOOR), log_m)), axis=-1)
    kl_qm = ops.tsum(ops.mul(q, ops.sub(ops.log(q, floor=JS_LOG_FLOOR), log_m)), axis=-1)
    return ops.scale(ops.add(kl_pm, kl_qm), 0.5)


def js_divergence(a: Tensor, b: Tensor) -> Tensor:
    return js_divergence_dist(ops.softmax(a), ops.softmax(b))


def negative_js(a: Tensor, b: Tensor) -> Tensor:
    return ops.scale(js_divergence(a, b), -1.0)


METRICS: Dict[str, DistanceMetric] = {
    m.name: m for m in (
        DistanceMetric("cosine_similarity", "equivariance", cosine_similarity),
        DistanceMetric("l2_similarity", "equivariance", l2_similarity),
        DistanceMetric("negative_js", "equivariance", negative_js),
        DistanceMetric("cosine_distance", "invariance", cosine_distance),
        DistanceMetric("l2_distance", "invariance", l2_distance),
        DistanceMetric("js_divergence", "invariance", js_divergence),
    )
}


def get_metric(metric) -> DistanceMetric:
    if isinstance(metric, DistanceMetric):
        return metric
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r}, expected one of {sorted(METRICS)}")
    return METRICS[metric]


def metric_per_sample(metric, a: Tensor, b: Tensor) -> Tensor:
    """逐样本度量, (B,D) -> (B,)"""
    _check_pair(a, b)
    return get_metric(metric)(a, b)


def metric_eval(metric, a: Tensor, b: Tensor) -> Tensor:
    """
    两个向量之间的标量度量 (作为待最小化的 loss)

    :param metric: DistanceMetric 或名称
    :param a: (D,) 向量
    :param b: (D,) 向量
    """
    if a.ndim != 1:
        raise MetricError(f"metric_eval expects vectors, got {a.shape}")
    return metric_per_sample(metric, a, b)


def feat_dist_loss(metric, proj_strong: Tensor, proj_weak: Tensor) -> Tensor:
    """
    逐样本度量后取均值, 梯度流入两个分支

    :param metric: DistanceMetric 或名称
    :param proj_strong: 强增强投影 (B, D)
    :param proj_weak: 弱增强投影 (B, D)
    """
    per_sample = metric_per_sample(metric, proj_strong, proj_weak)
    return ops.mean(per_sample) if per_sample.ndim else per_sample
