"""
共享 fixture: 量化后的随机图像, 小模型结构, 极小的训练配置
"""

import numpy as np
import pytest

from augment.transforms import dequantize
from model.network import ModelArch
from trainer.config import build_config

TINY_OVERRIDES = {
    "num_classes": "2",
    "samples_per_class": "12",
    "labels_per_class": "2",
    "test_per_class": "5",
    "image_size": "16",
    "width": "4",
    "proj_dim": "8",
    "B_s": "4",
    "mu": "2",
    "total_steps": "4",
    "log_every": "1",
    "eval_every": "2",
    "eval_batch_size": "16",
}


def quantized_image(seed: int, size: int = 32) -> np.ndarray:
    """8 位可精确表示的 3 x size x size 图像"""
    q = np.random.default_rng(seed).integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    return dequantize(q)


@pytest.fixture
def image() -> np.ndarray:
    return quantized_image(0)


@pytest.fixture
def small_arch() -> ModelArch:
    return ModelArch(num_classes=3, width=4, proj_dim=8, image_size=16)


@pytest.fixture
def tiny_overrides() -> dict:
    return dict(TINY_OVERRIDES)


@pytest.fixture
def tiny_cfg():
    return build_config(overrides=TINY_OVERRIDES)


@pytest.fixture(scope="session")
def trained_run(tmp_path_factory):
    """runs/tiny: 极小配置训练 4 步后的输出目录"""
    from trainer.runner import run_training

    run_dir = tmp_path_factory.mktemp("runs") / "tiny"
    run_training(build_config(overrides=TINY_OVERRIDES), run_dir)
    return run_dir
