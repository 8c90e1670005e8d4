"""
程序生成的形状数据集

每个类别是一种形状, 位置/大小/颜色随机抖动, 背景为噪声
"""

import colorsys
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from augment.rng import make_rng
from dataio.dataset import Dataset, DatasetFormatError

MaskFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _triangle(u, v):
    return (v >= -0.8) & (v <= 0.8) & (np.abs(u) <= (v + 0.8) * 0.5)


def _ell(u, v):
    upright = (u >= -0.8) & (u <= -0.35) & (np.abs(v) <= 0.8)
    foot = (v >= 0.35) & (v <= 0.8) & (np.abs(u) <= 0.8)
    return upright | foot


SHAPES: Dict[str, MaskFn] = {
    "square": lambda u, v: np.maximum(np.abs(u), np.abs(v)) <= 0.8,
    "circle": lambda u, v: u * u + v * v <= 0.8 ** 2,
    "triangle": _triangle,
    "cross": lambda u, v: ((np.abs(u) <= 0.25) & (np.abs(v) <= 0.85)) | ((np.abs(v) <= 0.25) & (np.abs(u) <= 0.85)),
    "diamond": lambda u, v: np.abs(u) + np.abs(v) <= 0.85,
    "ring": lambda u, v: (u * u + v * v <= 0.85 ** 2) & (u * u + v * v >= 0.45 ** 2),
    "ell": _ell,
    "bar": lambda u, v: (np.abs(u) <= 0.85) & (np.abs(v) <= 0.25),
}


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 4
    samples_per_class: int = 504
    image_size: int = 32
    position_jitter: float = 0.15
    scale_range: Tuple[float, float] = (0.5, 0.8)
    hue_jitter: float = 1.0
    noise: float = 0.08
    seed: int = 0
    partition: str = "train"


def _render(spec: SyntheticSpec, shape: MaskFn, rng: np.random.Generator) -> np.ndarray:
    size = spec.image_size
    coords = np.arange(size, dtype=np.float64) + 0.5
    cy, cx = size / 2 + rng.uniform(-spec.position_jitter, spec.position_jitter, size=2) * size
    half = rng.uniform(*spec.scale_range) * size / 2
    v, u = np.meshgrid((coords - cy) / half, (coords - cx) / half, indexing="ij")
    mask = shape(u, v)

    hue = rng.uniform(0.0, spec.hue_jitter)
    color = np.array(colorsys.hsv_to_rgb(hue, rng.uniform(0.6, 1.0), rng.uniform(0.7, 1.0)))
    background = rng.uniform(0.1, 0.4) + rng.normal(0.0, spec.noise, size=(3, size, size))
    img = np.where(mask[None], color[:, None, None] + rng.normal(0.0, spec.noise / 2, size=(3, size, size)),
                   background)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """
    生成类别均衡的形状数据集, 相同 spec 结果完全一致

    :param spec: 生成参数
    :return: num_classes * samples_per_class 张图像, 按类别排列
    """
    if not 2 <= spec.num_classes <= len(SHAPES):
        raise DatasetFormatError(f"synthetic dataset supports 2..{len(SHAPES)} classes, got {spec.num_classes}")
    if spec.samples_per_class < 1 or spec.image_size < 8:
        raise DatasetFormatError("samples_per_class must be >= 1 and image_size >= 8")
    names = list(SHAPES)[:spec.num_classes]
    images = np.empty((spec.num_classes * spec.samples_per_class, 3, spec.image_size, spec.image_size),
                      dtype=np.float32)
    labels = np.repeat(np.arange(spec.num_classes), spec.samples_per_class)
    for c, name in enumerate(names):
        for i in range(spec.samples_per_class):
            rng = make_rng(spec.seed, "synthetic", spec.partition, c, i)
            images[c * spec.samples_per_class + i] = _render(spec, SHAPES[name], rng)
    return Dataset(images=images, labels=labels, class_names=names)
