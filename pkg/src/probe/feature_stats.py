"""
不同增强视图之间的特征余弦距离统计 (分类器输入空间 feat_b)
"""

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from augment.pipeline import AugmentConfig, DEFAULT_AUGMENT, strong_augment, weak_augment
from augment.rng import make_rng
from model.network import ModelState
from probe.export import extract_features
from probe.linear_probe import ProbeError

PAIRS = ("weak_orig", "strong_orig", "weak_strong")


@dataclass
class DistanceStats:
    n: int
    pairs: Dict[str, Tuple[float, float]]

    def as_dict(self) -> dict:
        return {"n": self.n, **{name: {"mean": m, "std": s} for name, (m, s) in self.pairs.items()}}


def cosine_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """逐行 1 - cos(a, b), 值域 [0, 2]"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na = np.maximum(np.linalg.norm(a, axis=1), 1e-12)
    nb = np.maximum(np.linalg.norm(b, axis=1), 1e-12)
    cos = np.clip((a * b).sum(axis=1) / (na * nb), -1.0, 1.0)
    return 1.0 - cos


def feature_distance_stats(state: ModelState, images: np.ndarray, n: int, seed: int = 0,
                           aug: AugmentConfig = DEFAULT_AUGMENT) -> DistanceStats:
    """
    前 n 张图像上 (weak, orig), (strong, orig), (weak, strong) 三组余弦距离的均值与标准差

    :param state: 冻结的模型
    :param images: (N, 3, S, S)
    :param n: 使用的图像数, 1 <= n <= N
    :param seed: 增强种子
    """
    if not 1 <= n <= len(images):
        raise ProbeError(f"n must be in [1, {len(images)}], got {n}")
    subset = images[:n]
    weak = np.stack([weak_augment(img, make_rng(seed, "stats", i, "weak"), aug) for i, img in enumerate(subset)])
    strong = np.stack([strong_augment(img, make_rng(seed, "stats", i, "strong"), aug)
                       for i, img in enumerate(subset)])
    f_orig = extract_features(state, subset)
    f_weak = extract_features(state, weak)
    f_strong = extract_features(state, strong)

    pairs = {}
    for name, (x, y) in zip(PAIRS, ((f_weak, f_orig), (f_strong, f_orig), (f_weak, f_strong))):
        d = cosine_distances(x, y)
        pairs[name] = (float(d.mean()), float(d.std()))
    return DistanceStats(n=n, pairs=pairs)
