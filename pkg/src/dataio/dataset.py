"""
内存中的图像数据集
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np


class DatasetFormatError(ValueError):
    """数据文件截断, 尺寸不符或标签越界"""


@dataclass
class Dataset:
    """images: (N, 3, H, W) float32, 值域 [0,1]; labels: (N,) int64"""
    images: np.ndarray
    labels: np.ndarray
    class_names: Optional[List[str]] = None

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise DatasetFormatError(f"{len(self.images)} images but {len(self.labels)} labels")
        if self.images.ndim != 4 or (len(self.images) and self.images.shape[1] != 3):
            raise DatasetFormatError(f"images must be (N, 3, H, W), got {self.images.shape}")
        if self.class_names is not None and len(self.labels) and self.labels.max() >= len(self.class_names):
            raise DatasetFormatError(f"label {self.labels.max()} >= number of classes {len(self.class_names)}")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_classes(self) -> int:
        if self.class_names is not None:
            return len(self.class_names)
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(images=self.images[idx], labels=self.labels[idx], class_names=self.class_names)

    def head(self, n: int) -> "Dataset":
        return self.subset(np.arange(min(n, len(self))))
