"""
弱增强 α / 强增强 𝒜 / CutOut / 90 度旋转
采样 (sample_*) 与应用 (apply_*) 分离, 测试可直接构造参数
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from augment.geometry import ImageShapeError, check_image
from augment.rng import Rng
from augment.transforms import TRANSFORM_TABLE, TransformSpec, apply_transform

CUTOUT_FILL = 0.5


@dataclass(frozen=True)
class WeakParams:
    """弱增强参数: 是否水平翻转, 裁剪窗口左上角 (相对于填充后的图像)"""
    flip: bool
    top: int
    left: int
    pad: int


@dataclass(frozen=True)
class CutoutParams:
    center_y: int
    center_x: int
    side: int


@dataclass(frozen=True)
class StrongParams:
    ops: Tuple[Tuple[str, Optional[float]], ...]
    cutout: CutoutParams


@dataclass
class AugmentConfig:
    """增强相关的可配置项"""
    crop_pad: Optional[int] = None       # None -> ceil(H/8)
    cutout_side: Optional[int] = None    # None -> floor(H/2)
    num_ops: int = 2
    with_replacement: bool = True
    table: Tuple[TransformSpec, ...] = field(default=TRANSFORM_TABLE)

    def pad_for(self, h: int) -> int:
        return self.crop_pad if self.crop_pad is not None else math.ceil(h / 8)

    def side_for(self, h: int) -> int:
        return self.cutout_side if self.cutout_side is not None else h // 2


DEFAULT_AUGMENT = AugmentConfig()


# 弱增强

def sample_weak_params(rng: Rng, h: int, pad: int) -> WeakParams:
    flip = bool(rng.random() < 0.5)
    top = int(rng.integers(0, 2 * pad + 1))
    left = int(rng.integers(0, 2 * pad + 1))
    return WeakParams(flip=flip, top=top, left=left, pad=pad)


def apply_weak(img: np.ndarray, params: WeakParams) -> np.ndarray:
    """水平翻转, 反射填充, 随机裁剪回原尺寸"""
    check_image(img)
    _, h, w = img.shape
    out = img[:, :, ::-1] if params.flip else img
    if params.pad:
        p = params.pad
        out = np.pad(out, ((0, 0), (p, p), (p, p)), mode="reflect")
    out = out[:, params.top:params.top + h, params.left:params.left + w]
    return np.ascontiguousarray(out, dtype=np.float32)


def weak_augment(img: np.ndarray, rng: Rng, cfg: AugmentConfig = DEFAULT_AUGMENT) -> np.ndarray:
    """
    弱增强 α: p=0.5 水平翻转, 然后反射填充 ceil(H/8) 并随机裁剪 HxW

    :param img: C x H x W
    :param rng: 子流
    :return: 同形状图像
    """
    check_image(img)
    h = img.shape[1]
    return apply_weak(img, sample_weak_params(rng, h, cfg.pad_for(h)))


# CutOut

def sample_cutout_params(rng: Rng, h: int, w: int, side: int) -> CutoutParams:
    return CutoutParams(center_y=int(rng.integers(0, h)), center_x=int(rng.integers(0, w)), side=side)


def apply_cutout(img: np.ndarray, params: CutoutParams) -> np.ndarray:
    """以中心点放置边长 side 的灰色方块, 越界部分裁掉"""
    check_image(img)
    out = img.copy()
    if params.side <= 0:
        return out
    _, h, w = img.shape
    y0 = params.center_y - params.side // 2
    x0 = params.center_x - params.side // 2
    ys, ye = max(0, y0), min(h, y0 + params.side)
    xs, xe = max(0, x0), min(w, x0 + params.side)
    if ys < ye and xs < xe:
        out[:, ys:ye, xs:xe] = CUTOUT_FILL
    return out


def cutout(img: np.ndarray, rng: Rng, cfg: AugmentConfig = DEFAULT_AUGMENT) -> np.ndarray:
    """
    CutOut: 边长 floor(H/2) 的方块, 中心均匀采样, 填充 0.5

    :param img: C x H x W
    :param rng: 子流
    """
    check_image(img)
    _, h, w = img.shape
    return apply_cutout(img, sample_cutout_params(rng, h, w, cfg.side_for(h)))


# 强增强

def _sample_magnitude(rng: Rng, spec: TransformSpec) -> Optional[float]:
    if spec.magnitude_range is None:
        return None
    lo, hi = spec.magnitude_range
    if spec.integer:
        return int(rng.integers(int(lo), int(hi) + 1))
    return float(rng.uniform(lo, hi))


def sample_strong_params(rng: Rng, h: int, w: int, cfg: AugmentConfig = DEFAULT_AUGMENT) -> StrongParams:
    table = cfg.table
    picks = rng.choice(len(table), size=cfg.num_ops, replace=cfg.with_replacement)
    ops: List[Tuple[str, Optional[float]]] = []
    for idx in picks:
        spec = table[int(idx)]
        ops.append((spec.name, _sample_magnitude(rng, spec)))
    return StrongParams(ops=tuple(ops), cutout=sample_cutout_params(rng, h, w, cfg.side_for(h)))


def apply_strong(img: np.ndarray, params: StrongParams) -> np.ndarray:
    out = img
    for name, magnitude in params.ops:
        out = apply_transform(out, name, magnitude)
    return apply_cutout(out, params.cutout)


def strong_augment(img: np.ndarray, rng: Rng, cfg: AugmentConfig = DEFAULT_AUGMENT) -> np.ndarray:
    """
    强增强 𝒜: 从 14 种变换中均匀抽取 2 个 (默认有放回), 幅度在范围内均匀采样,
    按抽取顺序应用, 最后执行 CutOut

    :param img: C x H x W
    :param rng: 子流
    :return: 同形状图像
    """
    check_image(img)
    _, h, w = img.shape
    return apply_strong(img, sample_strong_params(rng, h, w, cfg))


# 旋转任务

def rotate90(img: np.ndarray, r: int) -> np.ndarray:
    """
    逆时针旋转 r*90 度, 无插值的像素置换

    :param img: C x H x W, H == W
    :param r: 0/1/2/3
    """
    if img.ndim != 3 or img.shape[1] != img.shape[2]:
        raise ImageShapeError(f"rotate90 needs a square image, got shape {img.shape}")
    if r not in (0, 1, 2, 3):
        raise ValueError(f"rotation index must be in 0..3, got {r}")
    return np.ascontiguousarray(np.rot90(img, k=r, axes=(1, 2)))
