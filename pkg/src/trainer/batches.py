"""
训练 batch 构造

有标签: 每个 epoch 重新打乱后循环取样, 打乱种子 (seed, "labeled", epoch)
无标签: 每步从无标签池有放回抽取, 种子 (seed, "unlabeled", step)
增强: 每个样本独立子流 (seed, step, j, tag), 与线程调度无关
"""

import logging
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterator, Optional

import numpy as np

from augment.pipeline import rotate90, strong_augment, weak_augment
from augment.rng import make_rng
from model.network import NUM_ROTATIONS
from trainer.config import TrainConfig
from trainer.splits import Split

logger = logging.getLogger(__name__)


@dataclass
class StepBatch:
    step: int
    labeled_images: np.ndarray
    labeled_targets: np.ndarray
    unlabeled_index: np.ndarray
    unlabeled_targets: np.ndarray
    first: np.ndarray
    second: Optional[np.ndarray]
    rot_images: Optional[np.ndarray]
    rot_targets: Optional[np.ndarray]


class BatchBuilder:
    """由 (配置, 数据, 划分, 步数) 确定地构造每一步的输入"""

    def __init__(self, images: np.ndarray, labels: np.ndarray, split: Split, cfg: TrainConfig):
        if len(split.labeled) == 0 or len(split.unlabeled) == 0:
            raise ValueError("split needs both labeled and unlabeled samples")
        self.images = images
        self.labels = np.asarray(labels, dtype=np.int64)
        self.split = split
        self.cfg = cfg
        self.aug = cfg.augment()
        self._perms: Dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def _perm(self, epoch: int) -> np.ndarray:
        with self._lock:
            if epoch not in self._perms:
                rng = make_rng(self.cfg.seed, "labeled", epoch)
                self._perms[epoch] = rng.permutation(self.split.labeled)
                self._perms.pop(epoch - 2, None)
            return self._perms[epoch]

    def labeled_indices(self, step: int) -> np.ndarray:
        n = len(self.split.labeled)
        positions = step * self.cfg.B_s + np.arange(self.cfg.B_s)
        return np.array([self._perm(int(p // n))[p % n] for p in positions], dtype=np.int64)

    def unlabeled_indices(self, step: int) -> np.ndarray:
        rng = make_rng(self.cfg.seed, "unlabeled", step)
        picks = rng.integers(0, len(self.split.unlabeled), size=self.cfg.B_u)
        return self.split.unlabeled[picks]

    def _view(self, img: np.ndarray, kind: str, step: int, j: int, tag: str) -> np.ndarray:
        rng = make_rng(self.cfg.seed, step, j, tag)
        if kind == "strong":
            return strong_augment(img, rng, self.aug)
        return weak_augment(img, rng, self.aug)

    def _rotated(self, img: np.ndarray, step: int, j: int, tag: str):
        if self.cfg.rot_order == "weak_first":
            base = weak_augment(img, make_rng(self.cfg.seed, step, j, tag), self.aug)
            return [rotate90(base, r) for r in range(NUM_ROTATIONS)]
        return [weak_augment(rotate90(img, r), make_rng(self.cfg.seed, step, j, tag, r), self.aug)
                for r in range(NUM_ROTATIONS)]

    def build(self, step: int) -> StepBatch:
        """
        构造第 step 步的 batch

        :param step: 从 0 开始的步数
        """
        cfg = self.cfg
        first_kind, second_kind = {
            "weak-strong": ("weak", "strong"),
            "weak-weak": ("weak", "weak"),
            "strong-strong": ("strong", "strong"),
        }[cfg.pairing]

        lab_idx = self.labeled_indices(step)
        labeled = np.stack([self._view(self.images[i], "weak", step, j, "lab_weak") for j, i in enumerate(lab_idx)])

        u_idx = self.unlabeled_indices(step)
        first = np.stack([self._view(self.images[i], first_kind, step, j, "u_first") for j, i in enumerate(u_idx)])
        second = None
        if cfg.lambda_u > 0:
            second = np.stack([self._view(self.images[i], second_kind, step, j, "u_second")
                               for j, i in enumerate(u_idx)])

        rot_images = rot_targets = None
        if cfg.lambda_r > 0:
            views = []
            for j, i in enumerate(u_idx):
                views.extend(self._rotated(self.images[i], step, j, "rot"))
            if cfg.rot_includes_labeled:
                for j, i in enumerate(lab_idx):
                    views.extend(self._rotated(self.images[i], step, j, "rot_lab"))
            rot_images = np.stack(views)
            rot_targets = np.tile(np.arange(NUM_ROTATIONS), len(views) // NUM_ROTATIONS)

        return StepBatch(
            step=step,
            labeled_images=labeled,
            labeled_targets=self.labels[lab_idx],
            unlabeled_index=u_idx,
            unlabeled_targets=self.labels[u_idx],
            first=first,
            second=second,
            rot_images=rot_images,
            rot_targets=rot_targets,
        )

    def iterate(self, start: int, stop: int, workers: int = 0) -> Iterator[StepBatch]:
        """
        依次产出 [start, stop) 的 batch; workers > 0 时在线程池中预取后续 batch

        :param workers: 预取线程数
        """
        if workers <= 0:
            for step in range(start, stop):
                yield self.build(step)
            return
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="augment") as pool:
            pending = deque()
            next_step = start
            while next_step < stop and len(pending) < workers + 1:
                pending.append(pool.submit(self.build, next_step))
                next_step += 1
            while pending:
                batch = pending.popleft().result()
                if next_step < stop:
                    pending.append(pool.submit(self.build, next_step))
                    next_step += 1
                yield batch
