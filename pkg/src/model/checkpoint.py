"""
检查点读写

格式 (小端):
    magic "CRMT" | version u32 | count u32
    每个张量: name_len u16 | name (UTF-8) | ndim u8 | dims u32 * ndim | float32 数据
EMA 影子参数以 "ema/" 前缀保存
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from model.ema import EmaState
from model.network import ModelArch, ModelState
from tensorcore import Tensor

logger = logging.getLogger(__name__)

MAGIC = b"CRMT"
VERSION = 1
EMA_PREFIX = "ema/"


class CheckpointError(ValueError):
    """检查点格式错误或与模型结构不匹配"""


def write_tensors(path, tensors: Dict[str, np.ndarray]):
    path = Path(path)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, data in tensors.items():
        encoded = name.encode("utf-8")
        data = np.asarray(data)
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(np.ascontiguousarray(data, dtype="<f4").tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"{self.path}: truncated checkpoint at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_tensors(path) -> Dict[str, np.ndarray]:
    """
    读取检查点中的全部张量

    :param path: 检查点文件
    :return: 名称 -> float32 数组 (保持文件中的顺序)
    """
    try:
        buf = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"{path}: {e}") from e
    reader = _Reader(buf, path)
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint")
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    tensors: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack("<B")
        dims = reader.unpack(f"<{ndim}I") if ndim else ()
        n = int(np.prod(dims)) if ndim else 1
        data = np.frombuffer(reader.take(4 * n), dtype="<f4").astype(np.float32).reshape(dims)
        if name in tensors:
            raise CheckpointError(f"{path}: duplicate tensor {name}")
        tensors[name] = data
    if reader.pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - reader.pos} trailing bytes")
    return tensors


def save_checkpoint(path, state: ModelState, ema: Optional[EmaState] = None):
    """
    保存原始参数, 以及可选的 EMA 影子参数

    :param path: 输出文件
    :param state: 模型参数
    :param ema: EMA 影子参数
    """
    tensors = {name: p.data for name, p in state.params.items()}
    if ema is not None:
        tensors.update({EMA_PREFIX + name: data for name, data in ema.shadow.items()})
    write_tensors(path, tensors)
    logger.info(f"📝 检查点已保存: {path} ({len(tensors)} 个张量)")


def load_checkpoint(path, arch: ModelArch, ema_decay: float = 0.999) -> Tuple[ModelState, Optional[EmaState]]:
    """
    读取检查点并按模型结构校验名称与形状

    :param path: 检查点文件
    :param arch: 期望的网络结构
    :param ema_decay: 恢复出的 EmaState 使用的衰减系数
    :return: (ModelState, EmaState 或 None)
    """
    tensors = read_tensors(path)
    expected = arch.param_shapes()
    raw = {k: v for k, v in tensors.items() if not k.startswith(EMA_PREFIX)}
    shadow = {k[len(EMA_PREFIX):]: v for k, v in tensors.items() if k.startswith(EMA_PREFIX)}

    def _check(group: Dict[str, np.ndarray], label: str):
        if set(group) != set(expected):
            missing = sorted(set(expected) - set(group))
            extra = sorted(set(group) - set(expected))
            raise CheckpointError(f"{path}: {label} tensors do not match model: missing={missing} extra={extra}")
        for name, shape in expected.items():
            if group[name].shape != shape:
                raise CheckpointError(f"{path}: {label} {name} has shape {group[name].shape}, expected {shape}")

    _check(raw, "raw")
    state = ModelState(arch, {name: Tensor(raw[name], requires_grad=True, name=name) for name in expected})
    ema = None
    if shadow:
        _check(shadow, "ema")
        ema = EmaState(arch, {name: shadow[name].astype(state.params[name].data.dtype) for name in expected},
                       ema_decay)
    logger.info(f"✅ 检查点已加载: {path}")
    return state, ema
