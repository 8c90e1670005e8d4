"""
可复现的随机数子流
算法: numpy PCG64, 种子由 SeedSequence(entropy=run_seed, spawn_key=keys) 派生
字符串键经 sha256 映射为 32 位整数, 保证跨平台一致
"""

import hashlib
from typing import Union

import numpy as np

Rng = np.random.Generator
Key = Union[int, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("rng keys must be int or str")
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"rng key must be non-negative, got {key}")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big", signed=False)


def make_rng(seed: int, *keys: Key) -> Rng:
    """
    派生一个独立子流

    :param seed: 运行种子
    :param keys: 子流路径, 例如 (step, sample, "strong")
    :return: numpy Generator
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_to_int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed: int, *keys: Key) -> int:
    """派生一个 63 位整数种子 (用于划分与参数初始化)"""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_to_int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0]) & ((1 << 63) - 1)
