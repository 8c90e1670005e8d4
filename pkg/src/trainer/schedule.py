"""
学习率调度
"""

import math

from trainer.config import TrainConfig


def lr_at(k: int, cfg: TrainConfig) -> float:
    """
    第 k 步的学习率

    cosine7_16: lr0 * cos(7 * pi * k / (16 * K))
    half_cosine: lr0 * (1 + cos(pi * k / K)) / 2

    :param k: 步数, 0 <= k < K
    :param cfg: 训练配置
    """
    total = cfg.total_steps
    if not 0 <= k < total:
        raise ValueError(f"step {k} outside schedule range [0, {total})")
    if cfg.lr_schedule == "half_cosine":
        return cfg.lr0 * 0.5 * (1.0 + math.cos(math.pi * k / total))
    return cfg.lr0 * math.cos(7.0 * math.pi * k / (16.0 * total))
