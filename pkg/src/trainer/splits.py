"""
有标签 / 无标签划分

每个划分使用独立派生的种子; 无标签部分保留标签, 仅用于伪标签错误率统计
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from augment.rng import derive_seed

logger = logging.getLogger(__name__)

SPLITS_NAME = "splits.json"


class SplitError(ValueError):
    """划分无法满足 (某类样本不足, 划分下标越界)"""


@dataclass
class Split:
    labeled: np.ndarray
    unlabeled: np.ndarray

    def to_dict(self) -> dict:
        return {"labeled": self.labeled.tolist(), "unlabeled": self.unlabeled.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Split":
        return cls(labeled=np.asarray(data["labeled"], dtype=np.int64),
                   unlabeled=np.asarray(data["unlabeled"], dtype=np.int64))


def make_splits(labels: Sequence[int], labels_per_class: int, n_splits: int = 5, seed: int = 0) -> List[Split]:
    """
    每类无放回抽取 labels_per_class 个有标签样本, 其余为无标签

    :param labels: 数据集全部标签
    :param labels_per_class: 每类有标签数量
    :param n_splits: 划分个数
    :param seed: 划分种子
    :return: n_splits 个互不相关的 Split
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels_per_class < 1:
        raise SplitError(f"labels_per_class must be >= 1, got {labels_per_class}")
    classes = np.unique(labels)
    for c in classes:
        count = int((labels == c).sum())
        if count < labels_per_class:
            raise SplitError(f"class {c} has {count} samples, fewer than labels_per_class={labels_per_class}")

    splits = []
    for i in range(n_splits):
        rng = np.random.default_rng(derive_seed(seed, "split", i))
        chosen = [rng.choice(np.flatnonzero(labels == c), size=labels_per_class, replace=False) for c in classes]
        labeled = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, dtype=np.int64)
        mask = np.ones(len(labels), dtype=bool)
        mask[labeled] = False
        splits.append(Split(labeled=labeled.astype(np.int64), unlabeled=np.flatnonzero(mask).astype(np.int64)))
    return splits


def select_split(splits: Sequence[Split], index: int) -> Split:
    if not 0 <= index < len(splits):
        raise SplitError(f"split index {index} out of range, {len(splits)} splits available")
    return splits[index]


def save_splits(path, splits: Sequence[Split], labels_per_class: int, seed: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"labels_per_class": labels_per_class, "seed": seed, "splits": [s.to_dict() for s in splits]}
    path.write_text(json.dumps(payload), encoding="utf-8")
    logger.info(f"📝 {len(splits)} 个划分已写入: {path}")
    return path


def load_splits(path, labels_per_class: Optional[int] = None, num_samples: Optional[int] = None) -> List[Split]:
    """
    读取 splits.json

    :param labels_per_class: 给定时要求与文件中记录的一致
    :param num_samples: 给定时要求所有下标落在 [0, num_samples) 内
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        stored = int(payload["labels_per_class"])
        splits = [Split.from_dict(s) for s in payload["splits"]]
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise SplitError(f"cannot read splits from {path}: {e}") from e
    if labels_per_class is not None and stored != labels_per_class:
        raise SplitError(f"{path}: saved splits use labels_per_class={stored}, config asks for {labels_per_class}")
    if num_samples is not None:
        for i, s in enumerate(splits):
            indices = np.concatenate([s.labeled, s.unlabeled])
            if indices.size and (indices.min() < 0 or indices.max() >= num_samples):
                raise SplitError(f"{path}: split {i} has indices outside a training set of {num_samples} images")
    return splits
