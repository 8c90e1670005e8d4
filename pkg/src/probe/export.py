"""
冻结特征的提取与 FEAT 二进制导出

FEAT 格式 (小端): magic "FEAT" | count u32 | dim u32 | count*dim float32 | count u32 标签
"""

import logging
import struct
from pathlib import Path
from typing import Tuple

import numpy as np

from model.network import ModelState
from tensorcore import no_grad
from tensorcore import ops

logger = logging.getLogger(__name__)

FEAT_MAGIC = b"FEAT"
FEATURE_KINDS = ("feat_a", "feat_b")


def feature_dim(state: ModelState, which: str = "feat_b") -> int:
    if which == "feat_a":
        return int(np.prod(state.arch.feat_a_shape))
    return state.arch.feat_b_dim


def extract_features(state: ModelState, images: np.ndarray, which: str = "feat_b",
                     batch_size: int = 256) -> np.ndarray:
    """
    只读前向, 返回 (N, D) 特征

    :param which: feat_b 为池化后特征, feat_a 为展平的池化前特征
    """
    if which not in FEATURE_KINDS:
        raise ValueError(f"feature kind must be one of {FEATURE_KINDS}, got {which}")
    chunks = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            feat_a = state.encode(images[start:start + batch_size])
            feats = ops.flatten(feat_a) if which == "feat_a" else ops.global_avg_pool(feat_a)
            chunks.append(feats.data)
    if not chunks:
        return np.zeros((0, feature_dim(state, which)), dtype=np.float32)
    return np.concatenate(chunks).astype(np.float32, copy=False)


def write_features(path, features: np.ndarray, labels) -> Path:
    path = Path(path)
    features = np.asarray(features, dtype="<f4")
    labels = np.asarray(labels, dtype="<u4")
    if features.ndim != 2 or len(features) != len(labels):
        raise ValueError(f"features {features.shape} and labels {labels.shape} do not match")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as f:
            f.write(FEAT_MAGIC + struct.pack("<II", *features.shape))
            f.write(np.ascontiguousarray(features).tobytes())
            f.write(np.ascontiguousarray(labels).tobytes())
    except OSError as e:
        raise OSError(f"cannot write features to {path}: {e}") from e
    return path


def read_features(path) -> Tuple[np.ndarray, np.ndarray]:
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != FEAT_MAGIC:
        raise ValueError(f"{path}: not a FEAT file")
    count, dim = struct.unpack("<II", buf[4:12])
    expected = 12 + 4 * count * dim + 4 * count
    if len(buf) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(buf)}")
    features = np.frombuffer(buf, dtype="<f4", count=count * dim, offset=12).reshape(count, dim)
    labels = np.frombuffer(buf, dtype="<u4", count=count, offset=12 + 4 * count * dim)
    return features.astype(np.float32), labels.astype(np.int64)


def export_features(state: ModelState, images: np.ndarray, labels, path, which: str = "feat_b") -> Path:
    """
    提取特征并写入 FEAT 文件 (供外部 t-SNE 等分析)

    :param state: 冻结的模型
    :param images: (N, 3, S, S)
    :param labels: (N,)
    :param path: 输出文件
    """
    features = extract_features(state, images, which)
    out = write_features(path, features, labels)
    logger.info(f"📝 特征已导出: {out} ({features.shape[0]} x {features.shape[1]})")
    return out
