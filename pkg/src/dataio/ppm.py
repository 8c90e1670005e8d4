"""
P6 PPM 图像输出 (maxval 255)
"""

from pathlib import Path

import numpy as np
import PIL.Image

from augment.transforms import quantize


def write_ppm(path, img: np.ndarray) -> Path:
    """
    :param path: 输出文件
    :param img: C x H x W, 值域 [0,1]
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    PIL.Image.fromarray(quantize(img)).save(path, format="PPM")
    return path


def read_ppm(path) -> np.ndarray:
    with PIL.Image.open(path) as im:
        q = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return np.ascontiguousarray(q.transpose(2, 0, 1)).astype(np.float32) / np.float32(255.0)
