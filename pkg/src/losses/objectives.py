"""
训练目标: 监督交叉熵, 伪标签, 无标签损失, 旋转预测, 加权总目标
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from losses.metrics import get_metric, metric_per_sample
from model.network import NUM_ROTATIONS
from tensorcore import Tensor
from tensorcore import ops


class LossInputError(ValueError):
    """标签, 类别数或权重不合法"""


@dataclass
class PseudoLabel:
    label: int
    confidence: float
    one_hot: np.ndarray


@dataclass
class UnlabeledTerms:
    """无标签损失的组成, mask 为常量"""
    total: Tensor
    pseudo: Tensor
    dist: Optional[Tensor]
    mask: np.ndarray
    pseudo_labels: List[PseudoLabel]


def _softmax_np(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _one_hot(labels: np.ndarray, num_classes: int, dtype) -> np.ndarray:
    out = np.zeros((len(labels), num_classes), dtype=dtype)
    out[np.arange(len(labels)), labels] = 1
    return out


def _check_labels(labels: Sequence[int], logits: Tensor, label_kind: str = "label") -> np.ndarray:
    if logits.ndim != 2:
        raise LossInputError(f"logits must be (B, C), got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(labels) != logits.shape[0]:
        raise LossInputError(f"{len(labels)} {label_kind}s for {logits.shape[0]} logit rows")
    if len(labels) and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise LossInputError(f"{label_kind} out of range [0, {logits.shape[1]}): {labels.tolist()}")
    return labels


def cross_entropy_per_sample(logits: Tensor, labels: np.ndarray) -> Tensor:
    """-log softmax(logits)[label], 逐样本 (B,)"""
    target = Tensor.wrap(_one_hot(labels, logits.shape[1], logits.data.dtype))
    return ops.scale(ops.tsum(ops.mul(ops.log_softmax(logits), target), axis=1), -1.0)


def make_pseudo_labels(weak_logits: np.ndarray) -> List[PseudoLabel]:
    """弱增强预测的 argmax 与置信度 (不参与梯度)"""
    probs = _softmax_np(np.asarray(weak_logits, dtype=np.float64))
    labels = probs.argmax(axis=1)
    one_hot = _one_hot(labels, probs.shape[1], np.float32)
    return [PseudoLabel(label=int(labels[i]), confidence=float(probs[i, labels[i]]), one_hot=one_hot[i])
            for i in range(len(labels))]


def _pseudo_per_sample(weak_logits: Tensor, strong_logits: Tensor):
    if weak_logits.shape != strong_logits.shape or weak_logits.ndim != 2:
        raise LossInputError(f"class-count mismatch: weak {weak_logits.shape} vs strong {strong_logits.shape}")
    pseudo = make_pseudo_labels(weak_logits.data)
    labels = np.array([p.label for p in pseudo], dtype=np.int64)
    return cross_entropy_per_sample(strong_logits, labels), pseudo


def pseudo_label_loss(weak_logits: Tensor, strong_logits: Tensor):
    """
    弱分支给出硬伪标签, 与强分支预测计算交叉熵

    :param weak_logits: (B, C), 不向其传播梯度
    :param strong_logits: (B, C)
    :return: (平均交叉熵, 每个样本的 PseudoLabel)
    """
    per_sample, pseudo = _pseudo_per_sample(weak_logits, strong_logits)
    return ops.mean(per_sample), pseudo


def unlabeled_loss(weak, strong, tau: float, metric=None, detach_weak: bool = False) -> UnlabeledTerms:
    """
    1{c_i > tau} * (L_Dist + L_PseudoLabel), 求和后除以 B_u (不是通过掩码的样本数)

    :param weak: 第一分支 FeatureBundle (提供伪标签)
    :param strong: 第二分支 FeatureBundle
    :param tau: 置信度阈值, (0, 1)
    :param metric: 度量名称; None 时不计算 L_Dist
    :param detach_weak: L_Dist 中是否截断第一分支的梯度
    """
    if not 0.0 < tau < 1.0:
        raise LossInputError(f"tau must be in (0, 1), got {tau}")
    if weak.logits.shape != strong.logits.shape or weak.logits.ndim != 2:
        raise LossInputError(f"class-count mismatch: weak {weak.logits.shape} vs strong {strong.logits.shape}")
    if metric is not None:
        get_metric(metric)
    pseudo = make_pseudo_labels(weak.logits.data)
    mask_np = np.array([p.confidence > tau for p in pseudo], dtype=bool)
    keep = np.flatnonzero(mask_np)
    batch = weak.logits.shape[0]

    # 只在通过阈值的行上计算, 其余行的值 (包括零向量或 NaN) 不进入 loss
    def _masked_mean(per_sample: Tensor) -> Tensor:
        return ops.scale(ops.tsum(per_sample), 1.0 / batch)

    zero = Tensor(np.zeros((), dtype=strong.logits.data.dtype))
    if keep.size:
        labels = np.array([pseudo[i].label for i in keep], dtype=np.int64)
        pseudo_term = _masked_mean(cross_entropy_per_sample(ops.take_rows(strong.logits, keep), labels))
    else:
        pseudo_term = zero
    dist_term = None
    total = pseudo_term
    if metric is not None:
        if keep.size:
            weak_proj = weak.proj.detach() if detach_weak else weak.proj
            dist = metric_per_sample(metric, ops.take_rows(strong.proj, keep), ops.take_rows(weak_proj, keep))
            dist_term = _masked_mean(dist)
        else:
            dist_term = zero
        total = ops.add(pseudo_term, dist_term)
    return UnlabeledTerms(total=total, pseudo=pseudo_term, dist=dist_term, mask=mask_np,
                          pseudo_labels=pseudo)


def supervised_loss(labels: Sequence[int], weak_logits: Tensor) -> Tensor:
    """
    有标签 batch 上的平均交叉熵

    :param labels: 类别下标
    :param weak_logits: 弱增强图像的 logits (B, C)
    """
    labels = _check_labels(labels, weak_logits)
    return ops.mean(cross_entropy_per_sample(weak_logits, labels))


def rotation_loss(rot_logits: Tensor, rot_targets: Sequence[int]) -> Tensor:
    """4 * B_u 个旋转预测上的平均交叉熵, 目标为 0..3"""
    if rot_logits.ndim != 2 or rot_logits.shape[1] != NUM_ROTATIONS:
        raise LossInputError(f"rotation logits must be (N, {NUM_ROTATIONS}), got {rot_logits.shape}")
    targets = _check_labels(rot_targets, rot_logits, "rotation target")
    return ops.mean(cross_entropy_per_sample(rot_logits, targets))


def total_objective(loss_sup: Tensor, loss_unlabeled: Optional[Tensor], loss_rot: Optional[Tensor],
                    lambda_u: float = 1.0, lambda_r: float = 1.0) -> Tensor:
    """
    L_S + lambda_u * L_U + lambda_r * L_Rot, 权重为 0 的项不进入计算图

    :param loss_sup: 监督损失
    :param loss_unlabeled: 无标签损失 (可为 None)
    :param loss_rot: 旋转损失 (可为 None)
    """
    if lambda_u < 0 or lambda_r < 0:
        raise LossInputError(f"loss weights must be >= 0, got lambda_u={lambda_u} lambda_r={lambda_r}")
    total = loss_sup
    if lambda_u > 0 and loss_unlabeled is not None:
        total = ops.add(total, ops.scale(loss_unlabeled, lambda_u))
    if lambda_r > 0 and loss_rot is not None:
        total = ops.add(total, ops.scale(loss_rot, lambda_r))
    return total
