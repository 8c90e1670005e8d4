"""
单步训练: 前向, 各项损失, 反向, SGD 更新, EMA 更新
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from losses.objectives import rotation_loss, make_pseudo_labels, supervised_loss, total_objective, unlabeled_loss
from model.ema import EmaState
from model.network import ModelState
from tensorcore import Tape, no_grad
from tensorcore import ops
from trainer.batches import StepBatch
from trainer.config import TrainConfig
from trainer.optim import SGD
from trainer.schedule import lr_at

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """总损失出现 NaN/Inf"""


@dataclass
class StepMetrics:
    step: int
    lr: float
    loss_total: float
    loss_sup: float
    loss_pseudo: float
    loss_dist: float
    loss_rot: float
    mask_rate: float
    pseudo_err_all: float
    pseudo_err_masked: Optional[float]
    eval_err_raw: Optional[float] = None
    eval_err_ema: Optional[float] = None

    def as_dict(self) -> dict:
        return asdict(self)


def _value(t) -> float:
    return 0.0 if t is None else float(t.data)


def train_step(state: ModelState, ema: EmaState, batch: StepBatch, cfg: TrainConfig, optimizer: SGD) -> StepMetrics:
    """
    执行一步训练并返回该步指标

    :param state: 模型参数 (原地更新)
    :param ema: EMA 影子参数 (原地更新)
    :param batch: 本步输入
    :param cfg: 训练配置
    :param optimizer: 持有动量状态的优化器
    """
    k = batch.step
    lr = lr_at(k, cfg)
    optimizer.zero_grad()

    loss_pseudo = loss_dist = loss_unlabeled = loss_rot = None
    with Tape() as tape:
        labeled = state.forward(batch.labeled_images)
        loss_sup = supervised_loss(batch.labeled_targets, labeled.logits)

        if cfg.lambda_u > 0:
            first = state.forward(batch.first)
            second = state.forward(batch.second)
            terms = unlabeled_loss(first, second, cfg.tau, cfg.dist_metric, detach_weak=cfg.detach_weak)
            loss_unlabeled, loss_pseudo, loss_dist = terms.total, terms.pseudo, terms.dist
            pseudo = terms.pseudo_labels
        else:
            with no_grad():
                pseudo = make_pseudo_labels(state.forward(batch.first).logits.data)

        if cfg.lambda_r > 0:
            feat_b = ops.global_avg_pool(state.encode(batch.rot_images))
            loss_rot = rotation_loss(state.rot_forward(feat_b), batch.rot_targets)

        total = total_objective(loss_sup, loss_unlabeled, loss_rot, cfg.lambda_u, cfg.lambda_r)

    total_value = float(total.data)
    if not math.isfinite(total_value):
        raise TrainingDivergedError(f"loss_total is {total_value} at step {k}")
    if total._tape is tape:
        tape.backward(total)
    optimizer.step(lr)
    ema.update(state)

    predicted = np.array([p.label for p in pseudo], dtype=np.int64)
    confident = np.array([p.confidence for p in pseudo]) > cfg.tau
    wrong = predicted != batch.unlabeled_targets
    return StepMetrics(
        step=k + 1,
        lr=lr,
        loss_total=total_value,
        loss_sup=_value(loss_sup),
        loss_pseudo=_value(loss_pseudo),
        loss_dist=_value(loss_dist),
        loss_rot=_value(loss_rot),
        mask_rate=float(confident.mean()),
        pseudo_err_all=float(wrong.mean()),
        pseudo_err_masked=float(wrong[confident].mean()) if confident.any() else None,
    )
