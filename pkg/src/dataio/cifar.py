"""
CIFAR-10 二进制格式读取
每条记录: 1 字节标签 + 3072 字节像素 (R, G, B 平面, 行优先 32x32)
"""

import logging
from pathlib import Path
from typing import Tuple

import numpy as np

from dataio.dataset import Dataset, DatasetFormatError

logger = logging.getLogger(__name__)

IMAGE_SIZE = 32
RECORD_BYTES = 1 + 3 * IMAGE_SIZE * IMAGE_SIZE
NUM_CLASSES = 10
CLASS_NAMES = ["airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"]
TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
TEST_FILE = "test_batch.bin"


def read_cifar_binary(path) -> Dataset:
    """
    读取单个 CIFAR 二进制文件

    :param path: 文件路径
    :return: Dataset, 像素 v -> v / 255
    """
    path = Path(path)
    try:
        raw = np.fromfile(path, dtype=np.uint8)
    except OSError as e:
        raise DatasetFormatError(f"cannot read {path}: {e}") from e
    if raw.size == 0 or raw.size % RECORD_BYTES != 0:
        raise DatasetFormatError(
            f"{path}: size {raw.size} is not a positive multiple of the record size {RECORD_BYTES}")
    records = raw.reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if labels.max() >= NUM_CLASSES:
        bad = int(np.flatnonzero(labels >= NUM_CLASSES)[0])
        raise DatasetFormatError(f"{path}: record {bad} has label {labels[bad]} >= {NUM_CLASSES}")
    images = records[:, 1:].reshape(-1, 3, IMAGE_SIZE, IMAGE_SIZE).astype(np.float32) / np.float32(255.0)
    logger.info(f"✅ 读取 {path}: {len(labels)} 张图像")
    return Dataset(images=images, labels=labels, class_names=list(CLASS_NAMES))


def load_cifar10(data_dir) -> Tuple[Dataset, Dataset]:
    """读取目录中的 5 个训练文件和 1 个测试文件"""
    data_dir = Path(data_dir)
    parts = [read_cifar_binary(data_dir / name) for name in TRAIN_FILES]
    train = Dataset(images=np.concatenate([p.images for p in parts]),
                    labels=np.concatenate([p.labels for p in parts]),
                    class_names=list(CLASS_NAMES))
    return train, read_cifar_binary(data_dir / TEST_FILE)
