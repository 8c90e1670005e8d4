"""
几何变换: 逆映射 + 双线性采样, 源图像外部填 0
图像布局 C x H x W, 坐标以像素索引为单位
"""

import math

import numpy as np


class ImageShapeError(ValueError):
    """图像形状不满足要求"""


def check_image(img: np.ndarray):
    if img.ndim != 3 or img.shape[0] != 3:
        raise ImageShapeError(f"expected a 3xHxW image, got shape {img.shape}")


def sample_bilinear(img: np.ndarray, src_x: np.ndarray, src_y: np.ndarray) -> np.ndarray:
    """
    在源坐标处双线性取值

    :param img: C x H x W
    :param src_x: H x W 源列坐标
    :param src_y: H x W 源行坐标
    :return: C x H x W
    """
    _, h, w = img.shape
    x0 = np.floor(src_x).astype(np.int64)
    y0 = np.floor(src_y).astype(np.int64)
    fx = (src_x - x0).astype(img.dtype)
    fy = (src_y - y0).astype(img.dtype)
    one = img.dtype.type(1)

    def tap(yy, xx):
        inside = (xx >= 0) & (xx < w) & (yy >= 0) & (yy < h)
        values = img[:, np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
        return np.where(inside[None], values, img.dtype.type(0))

    top = tap(y0, x0) * ((one - fx) * (one - fy)) + tap(y0, x0 + 1) * (fx * (one - fy))
    bottom = tap(y0 + 1, x0) * ((one - fx) * fy) + tap(y0 + 1, x0 + 1) * (fx * fy)
    return top + bottom


def _grid(h: int, w: int):
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return xs, ys


def translate(img: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """内容向右平移 dx, 向下平移 dy 像素"""
    xs, ys = _grid(*img.shape[1:])
    return sample_bilinear(img, xs - dx, ys - dy)


def shear(img: np.ndarray, rx: float, ry: float) -> np.ndarray:
    """输出 (x, y) 取自源 (x + rx*y, y + ry*x)"""
    xs, ys = _grid(*img.shape[1:])
    return sample_bilinear(img, xs + rx * ys, ys + ry * xs)


def rotate(img: np.ndarray, degrees: float) -> np.ndarray:
    """绕图像中心逆时针旋转"""
    _, h, w = img.shape
    xs, ys = _grid(h, w)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = math.radians(degrees)
    cos, sin = math.cos(theta), math.sin(theta)
    dx, dy = xs - cx, ys - cy
    return sample_bilinear(img, cos * dx - sin * dy + cx, sin * dx + cos * dy + cy)


def scale(img: np.ndarray, factor: float) -> np.ndarray:
    """绕中心缩放, factor < 1 时内容变小"""
    if factor <= 0:
        raise ValueError(f"scale factor must be positive, got {factor}")
    _, h, w = img.shape
    xs, ys = _grid(h, w)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    return sample_bilinear(img, (xs - cx) / factor + cx, (ys - cy) / factor + cy)
