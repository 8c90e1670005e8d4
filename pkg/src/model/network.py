"""
网络组件: 编码器 f, 分类器 g, 投影 z, 旋转预测头 h
编码器为 3 个卷积块 (3x3 conv + relu + 2x2 平均池化)
"""

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from augment.rng import derive_seed
from tensorcore import ShapeError, Tensor
from tensorcore import ops

logger = logging.getLogger(__name__)

PROJ_HEADS = ("linear", "none", "mlp")
PLACEMENTS = ("a", "b")
NUM_ROTATIONS = 4


@dataclass(frozen=True)
class ModelArch:
    """网络结构配置"""
    num_classes: int
    width: int = 16
    proj_dim: int = 128
    proj_head: str = "linear"
    dist_placement: str = "a"
    image_size: int = 32

    def __post_init__(self):
        if self.proj_head not in PROJ_HEADS:
            raise ValueError(f"proj_head must be one of {PROJ_HEADS}, got {self.proj_head}")
        if self.dist_placement not in PLACEMENTS:
            raise ValueError(f"dist_placement must be one of {PLACEMENTS}, got {self.dist_placement}")
        if self.image_size % 8 != 0:
            raise ValueError(f"image_size must be a multiple of 8, got {self.image_size}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def channels(self) -> Tuple[int, int, int]:
        return self.width, 2 * self.width, 4 * self.width

    @property
    def feat_a_shape(self) -> Tuple[int, int, int]:
        side = self.image_size // 8
        return 4 * self.width, side, side

    @property
    def feat_b_dim(self) -> int:
        return 4 * self.width

    @property
    def dist_input_dim(self) -> int:
        c, h, w = self.feat_a_shape
        return c * h * w if self.dist_placement == "a" else self.feat_b_dim

    @property
    def proj_out_dim(self) -> int:
        return self.dist_input_dim if self.proj_head == "none" else self.proj_dim

    def param_shapes(self) -> Dict[str, Tuple[int, ...]]:
        shapes: Dict[str, Tuple[int, ...]] = {}
        in_ch = 3
        for i, out_ch in enumerate(self.channels, start=1):
            shapes[f"encoder.conv{i}.weight"] = (out_ch, in_ch, 3, 3)
            shapes[f"encoder.conv{i}.bias"] = (out_ch,)
            in_ch = out_ch
        shapes["classifier.weight"] = (self.feat_b_dim, self.num_classes)
        shapes["classifier.bias"] = (self.num_classes,)
        if self.proj_head == "linear":
            shapes["projection.weight"] = (self.dist_input_dim, self.proj_dim)
            shapes["projection.bias"] = (self.proj_dim,)
        elif self.proj_head == "mlp":
            shapes["projection.fc1.weight"] = (self.dist_input_dim, self.proj_dim)
            shapes["projection.fc1.bias"] = (self.proj_dim,)
            shapes["projection.fc2.weight"] = (self.proj_dim, self.proj_dim)
            shapes["projection.fc2.bias"] = (self.proj_dim,)
        shapes["rothead.fc1.weight"] = (self.feat_b_dim, self.feat_b_dim)
        shapes["rothead.fc1.bias"] = (self.feat_b_dim,)
        shapes["rothead.fc2.weight"] = (self.feat_b_dim, NUM_ROTATIONS)
        shapes["rothead.fc2.bias"] = (NUM_ROTATIONS,)
        return shapes


@dataclass
class FeatureBundle:
    """前向输出: feat_a 池化前特征, feat_b 池化后特征, logits, proj"""
    feat_a: Tensor
    feat_b: Tensor
    logits: Tensor
    proj: Tensor


def init_params(arch: ModelArch, seed: int) -> Dict[str, Tensor]:
    """
    Kaiming 均匀初始化权重, 偏置为 0

    :param arch: 网络结构
    :param seed: 参数初始化种子
    """
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "init")))
    params: Dict[str, Tensor] = {}
    for name, shape in arch.param_shapes().items():
        if name.endswith(".bias"):
            data = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            bound = math.sqrt(6.0 / fan_in)
            data = rng.uniform(-bound, bound, size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def _pool_kernel(channels: int, dtype) -> Tensor:
    kernel = np.zeros((channels, channels, 2, 2), dtype=dtype)
    idx = np.arange(channels)
    kernel[idx, idx] = 0.25
    return Tensor(kernel)


def _linear(x: Tensor, params: Dict[str, Tensor], prefix: str) -> Tensor:
    return ops.add(ops.matmul(x, params[f"{prefix}.weight"]), params[f"{prefix}.bias"])


class ModelState:
    """网络参数集合 (训练时的唯一写者为 trainer)"""

    def __init__(self, arch: ModelArch, params: Dict[str, Tensor]):
        self.arch = arch
        expected = arch.param_shapes()
        if set(expected) != set(params):
            missing = sorted(set(expected) - set(params))
            extra = sorted(set(params) - set(expected))
            raise ShapeError(f"parameter names mismatch: missing={missing} extra={extra}")
        for name, shape in expected.items():
            if params[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {params[name].shape}")
        self.params = params
        self._pool_kernels: Dict[Tuple[int, str], Tensor] = {}

    @classmethod
    def create(cls, arch: ModelArch, seed: int) -> "ModelState":
        return cls(arch, init_params(arch, seed))

    def parameters(self) -> List[Tensor]:
        return list(self.params.values())

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        return list(self.params.items())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def _pool(self, x: Tensor) -> Tensor:
        key = (x.shape[1], str(x.data.dtype))
        if key not in self._pool_kernels:
            self._pool_kernels[key] = _pool_kernel(x.shape[1], x.data.dtype)
        return ops.conv2d(x, self._pool_kernels[key], stride=2, pad=0)

    def encode(self, images) -> Tensor:
        """编码器 f, 输出 feat_a (N, 4w, S/8, S/8)"""
        x = images if isinstance(images, Tensor) else Tensor(images)
        size = self.arch.image_size
        if x.ndim != 4 or x.shape[1:] != (3, size, size):
            raise ShapeError(f"forward: expected batch (N,3,{size},{size}), got {x.shape}")
        for i in range(1, 4):
            x = ops.conv2d(x, self.params[f"encoder.conv{i}.weight"], self.params[f"encoder.conv{i}.bias"],
                           stride=1, pad=1)
            x = ops.relu(x)
            x = self._pool(x)
        return x

    def project(self, feat_a: Tensor, feat_b: Tensor) -> Tensor:
        """投影 z, 输入位置 (a) flatten(feat_a) 或 (b) feat_b"""
        x = ops.flatten(feat_a) if self.arch.dist_placement == "a" else feat_b
        if self.arch.proj_head == "none":
            return x
        if self.arch.proj_head == "linear":
            return _linear(x, self.params, "projection")
        hidden = ops.relu(_linear(x, self.params, "projection.fc1"))
        return _linear(hidden, self.params, "projection.fc2")

    def forward(self, images) -> FeatureBundle:
        """
        完整前向, 产生 feat_a / feat_b / logits / proj

        :param images: (N,3,S,S) 数组或 Tensor
        """
        feat_a = self.encode(images)
        feat_b = ops.global_avg_pool(feat_a)
        logits = _linear(feat_b, self.params, "classifier")
        proj = self.project(feat_a, feat_b)
        return FeatureBundle(feat_a=feat_a, feat_b=feat_b, logits=logits, proj=proj)

    def rot_forward(self, feat_b: Tensor) -> Tensor:
        """旋转预测头 h: 两层全连接 + relu, 输出 4 类 logits"""
        if feat_b.ndim != 2 or feat_b.shape[1] != self.arch.feat_b_dim:
            raise ShapeError(f"rot_forward: expected (N,{self.arch.feat_b_dim}), got {feat_b.shape}")
        hidden = ops.relu(_linear(feat_b, self.params, "rothead.fc1"))
        return _linear(hidden, self.params, "rothead.fc2")

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.params[name].data).tobytes())
        return digest.hexdigest()


def forward(state: ModelState, batch) -> FeatureBundle:
    return state.forward(batch)


def rot_forward(state: ModelState, feat_b: Tensor) -> Tensor:
    return state.rot_forward(feat_b)
