"""
强增强使用的 14 种图像变换
颜色与几何变换在 [0,1] 浮点域上进行;
autocontrast / equalize / posterize / solarize 先量化到 8 位, 处理后再反量化
"""

from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import PIL.Image
import PIL.ImageOps

from augment import geometry
from augment.geometry import check_image


class TransformRangeError(ValueError):
    """幅度超出变换范围"""


@dataclass(frozen=True)
class TransformSpec:
    """变换名称与幅度范围 (无参数变换的范围为 None)"""
    name: str
    magnitude_range: Optional[Tuple[float, float]] = None
    integer: bool = False

    def check(self, magnitude: Optional[float]):
        if self.magnitude_range is None:
            return
        lo, hi = self.magnitude_range
        if magnitude is None or not lo <= magnitude <= hi:
            raise TransformRangeError(f"{self.name}: magnitude {magnitude} outside [{lo}, {hi}]")


TRANSFORM_TABLE: Tuple[TransformSpec, ...] = (
    TransformSpec("autocontrast"),
    TransformSpec("brightness", (0.05, 0.95)),
    TransformSpec("color", (0.05, 0.95)),
    TransformSpec("contrast", (0.05, 0.95)),
    TransformSpec("equalize"),
    TransformSpec("identity"),
    TransformSpec("posterize", (4, 8), integer=True),
    TransformSpec("rotate", (-30.0, 30.0)),
    TransformSpec("sharpness", (0.05, 0.95)),
    TransformSpec("shear_x", (-0.3, 0.3)),
    TransformSpec("shear_y", (-0.3, 0.3)),
    TransformSpec("solarize", (0.0, 1.0)),
    TransformSpec("translate_x", (-0.3, 0.3)),
    TransformSpec("translate_y", (-0.3, 0.3)),
)
TRANSFORMS: Dict[str, TransformSpec] = {spec.name: spec for spec in TRANSFORM_TABLE}

_GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float32)
_SMOOTH_KERNEL = np.array([[1, 1, 1], [1, 5, 1], [1, 1, 1]], dtype=np.float32) / 13.0


def quantize(img: np.ndarray) -> np.ndarray:
    """C x H x W 浮点 -> H x W x C uint8"""
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    return np.ascontiguousarray(q.transpose(1, 2, 0))


def dequantize(q: np.ndarray) -> np.ndarray:
    """H x W x C uint8 -> C x H x W float32"""
    return np.ascontiguousarray(q.transpose(2, 0, 1)).astype(np.float32) / np.float32(255.0)


def _with_pil(img: np.ndarray, fn: Callable[[PIL.Image.Image], PIL.Image.Image]) -> np.ndarray:
    out = fn(PIL.Image.fromarray(quantize(img)))
    return dequantize(np.asarray(out, dtype=np.uint8))


def _blend(degenerate: np.ndarray, img: np.ndarray, factor: float) -> np.ndarray:
    f = img.dtype.type(factor)
    return degenerate + f * (img - degenerate)


def _grayscale(img: np.ndarray) -> np.ndarray:
    return np.tensordot(_GRAY_WEIGHTS.astype(img.dtype), img, axes=(0, 0))


def _smooth(img: np.ndarray) -> np.ndarray:
    """3x3 平滑, 边界像素保持原值"""
    out = img.copy()
    _, h, w = img.shape
    if h < 3 or w < 3:
        return out
    acc = np.zeros((img.shape[0], h - 2, w - 2), dtype=img.dtype)
    for i in range(3):
        for j in range(3):
            acc += img.dtype.type(_SMOOTH_KERNEL[i, j]) * img[:, i:i + h - 2, j:j + w - 2]
    out[:, 1:-1, 1:-1] = acc
    return out


def _solarize(img: np.ndarray, threshold: float) -> np.ndarray:
    q = quantize(img)
    cut = threshold * 255.0
    q = np.where(q > cut, 255 - q, q).astype(np.uint8)
    return dequantize(q)


def _apply(img: np.ndarray, name: str, magnitude: Optional[float]) -> np.ndarray:
    _, h, w = img.shape
    if name == "identity":
        return img.copy()
    if name == "autocontrast":
        return _with_pil(img, PIL.ImageOps.autocontrast)
    if name == "equalize":
        return _with_pil(img, PIL.ImageOps.equalize)
    if name == "posterize":
        return _with_pil(img, lambda im: PIL.ImageOps.posterize(im, int(magnitude)))
    if name == "solarize":
        return _solarize(img, magnitude)
    if name == "brightness":
        return _blend(np.zeros_like(img), img, magnitude)
    if name == "color":
        gray = _grayscale(img)
        return _blend(np.broadcast_to(gray, img.shape), img, magnitude)
    if name == "contrast":
        mean = _grayscale(img).mean(dtype=np.float64)
        return _blend(np.full_like(img, mean), img, magnitude)
    if name == "sharpness":
        return _blend(_smooth(img), img, magnitude)
    if name == "rotate":
        return geometry.rotate(img, magnitude)
    if name == "shear_x":
        return geometry.shear(img, magnitude, 0.0)
    if name == "shear_y":
        return geometry.shear(img, 0.0, magnitude)
    if name == "translate_x":
        return geometry.translate(img, magnitude * w, 0.0)
    if name == "translate_y":
        return geometry.translate(img, 0.0, magnitude * h)
    raise TransformRangeError(f"unknown transform: {name}")


def apply_transform(img: np.ndarray, spec, magnitude: Optional[float] = None) -> np.ndarray:
    """
    按名称语义应用单个变换

    :param img: C x H x W, 值域 [0,1]
    :param spec: TransformSpec 或变换名称
    :param magnitude: 变换幅度, 必须落在 spec 范围内
    :return: 同形状图像, 值域 [0,1]
    """
    check_image(img)
    if isinstance(spec, str):
        if spec not in TRANSFORMS:
            raise TransformRangeError(f"unknown transform: {spec}")
        spec = TRANSFORMS[spec]
    spec.check(magnitude)
    out = _apply(img.astype(np.float32, copy=False), spec.name, magnitude)
    return np.clip(out, 0.0, 1.0).astype(np.float32, copy=False)
