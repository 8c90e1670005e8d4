"""
等变性探针: 线性分类器能否从冻结特征中判断某个增强是否被施加
误差越低, 特征越能区分增强 (越等变)
"""

import csv
import logging
from pathlib import Path
from typing import Callable, Dict, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from augment import geometry
from augment.pipeline import strong_augment, weak_augment
from augment.rng import make_rng
from augment.transforms import apply_transform
from model.network import ModelState
from probe.export import extract_features
from probe.linear_probe import ProbeError, fit_linear_probe

logger = logging.getLogger(__name__)

PROBE_TRANSFORMS = ("translation", "scaling", "rotation", "color_jitter", "strong_vs_weak")
RESULTS_HEADER = ["model_tag", "transform", "probe_error"]


class ProbeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    transform: Literal["translation", "scaling", "rotation", "color_jitter", "strong_vs_weak", "identity"] = \
        "strong_vs_weak"
    train_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    lr: float = Field(0.001, gt=0.0)
    epochs: int = Field(50, ge=1)
    seed: int = 0
    feature: Literal["feat_a", "feat_b"] = "feat_b"
    translate_px: float = 4.0
    scale_factor: float = 0.8
    rotate_degrees: float = 15.0
    brightness: float = 0.5


PairFn = Callable[[np.ndarray, int], tuple]


def _pair_builder(cfg: ProbeConfig) -> PairFn:
    """返回 (图像, 下标) -> (类别 0 视图, 类别 1 视图)"""
    fixed: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
        "identity": lambda img: img.copy(),
        "translation": lambda img: geometry.translate(img, cfg.translate_px, 0.0),
        "scaling": lambda img: geometry.scale(img, cfg.scale_factor),
        "rotation": lambda img: geometry.rotate(img, cfg.rotate_degrees),
        "color_jitter": lambda img: apply_transform(img, "brightness", cfg.brightness),
    }
    if cfg.transform == "strong_vs_weak":
        def pair(img, i):
            weak = weak_augment(img, make_rng(cfg.seed, "probe", i, "weak"))
            strong = strong_augment(img, make_rng(cfg.seed, "probe", i, "strong"))
            return weak, strong
        return pair
    fn = fixed[cfg.transform]
    return lambda img, i: (img, fn(img))


def build_probe_set(state: ModelState, images: np.ndarray, cfg: ProbeConfig):
    """每张图像产生一对特征: (原图, 0) 和 (变换后, 1)"""
    pair = _pair_builder(cfg)
    first, second = zip(*(pair(img, i) for i, img in enumerate(images)))
    feats0 = extract_features(state, np.stack(first), cfg.feature)
    feats1 = extract_features(state, np.stack(second), cfg.feature)
    return feats0, feats1


def equivariance_probe(state: ModelState, images: np.ndarray, cfg: ProbeConfig = ProbeConfig()) -> float:
    """
    训练线性 SVM 判断增强是否被施加, 返回留出集错误率

    :param state: 冻结的模型 (不会被修改)
    :param images: (N, 3, S, S)
    :param cfg: 探针配置
    :return: 错误率, [0, 1]
    """
    if len(images) < 2:
        raise ProbeError(f"probe needs at least 2 images, got {len(images)}")
    feats0, feats1 = build_probe_set(state, images, cfg)
    if np.array_equal(np.ptp(np.concatenate([feats0, feats1]), axis=0), np.zeros(feats0.shape[1])):
        raise ProbeError("degenerate probe set: every feature vector is identical")

    order = make_rng(cfg.seed, "probe", "split").permutation(len(images))
    n_train = min(len(images) - 1, max(1, int(round(cfg.train_fraction * len(images)))))
    train_idx, held_idx = order[:n_train], order[n_train:]

    def stack(idx):
        x = np.concatenate([feats0[idx], feats1[idx]])
        y = np.concatenate([np.zeros(len(idx), dtype=np.int64), np.ones(len(idx), dtype=np.int64)])
        return x, y

    x_train, y_train = stack(train_idx)
    probe = fit_linear_probe(x_train, y_train, lr=cfg.lr, epochs=cfg.epochs, seed=cfg.seed)
    x_held, y_held = stack(held_idx)
    error = probe.error(x_held, y_held)
    logger.info(f"📊 probe {cfg.transform}: error={error:.4f} (train {n_train}, held-out {len(held_idx)} images)")
    return error


def append_probe_result(path, model_tag: str, transform: str, error: float) -> Path:
    """追加一行到结果 CSV (model_tag,transform,probe_error)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    is_new = not path.exists() or path.stat().st_size == 0
    with path.open("a", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        if is_new:
            writer.writerow(RESULTS_HEADER)
        writer.writerow([model_tag, transform, f"{error:.8g}"])
    return path
