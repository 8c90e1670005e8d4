"""
训练配置

分层顺序: 内置默认值 -> 桌面规模 profile -> 配置文件 -> --set 覆盖
文件或命令行中显式给出的键总是优先于 profile
"""

import logging
from pathlib import Path
from typing import Dict, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from augment.pipeline import AugmentConfig
from model.network import ModelArch
from utils.config_file import ConfigError, format_config, read_config_file

logger = logging.getLogger(__name__)

DESK_PROFILE: Dict[str, object] = {"B_s": 16, "mu": 4, "total_steps": 2000}
RESOLVED_NAME = "config.resolved"

_OPTIONAL_FIELDS = ("data_path", "cutout_side", "crop_pad", "out_dir", "dist_metric")


class TrainConfig(BaseModel):
    """一次训练运行的全部参数, 运行结果仅由它决定"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    dataset: Literal["synthetic", "cifar"] = "synthetic"
    data_path: Optional[str] = None
    num_classes: int = 4
    labels_per_class: int = 4
    split_index: int = 0
    split_seed: int = 0
    seed: int = 0
    samples_per_class: int = 504
    test_per_class: int = 250
    image_size: int = 32

    B_s: int = 64
    mu: int = 7
    tau: float = 0.95
    lambda_u: float = 1.0
    lambda_r: float = 1.0
    lr0: float = 0.03
    lr_schedule: Literal["cosine7_16", "half_cosine"] = "cosine7_16"
    momentum: float = 0.9
    weight_decay: float = 5e-4
    nesterov: bool = True
    ema_decay: float = 0.999
    total_steps: int = 1048576

    width: int = 16
    proj_dim: int = 128
    dist_metric: Optional[str] = "cosine_similarity"
    dist_placement: Literal["a", "b"] = "a"
    proj_head: Literal["linear", "none", "mlp"] = "linear"
    pairing: Literal["weak-strong", "weak-weak", "strong-strong"] = "weak-strong"
    detach_weak: bool = False
    rot_includes_labeled: bool = False
    rot_order: Literal["rotate_first", "weak_first"] = "rotate_first"
    strong_replacement: bool = True
    cutout_side: Optional[int] = None
    crop_pad: Optional[int] = None

    desk_profile: bool = False
    log_every: int = 50
    eval_every: int = 500
    eval_batch_size: int = 256
    workers: int = 0
    out_dir: Optional[str] = None

    @field_validator(*_OPTIONAL_FIELDS, mode="before")
    @classmethod
    def _none_literal(cls, v):
        if isinstance(v, str) and v.strip().lower() in ("", "none", "null"):
            return None
        return v

    @field_validator("dist_metric")
    @classmethod
    def _known_metric(cls, v):
        from losses.metrics import METRICS
        if v is not None and v not in METRICS:
            raise ValueError(f"dist_metric must be 'none' or one of {sorted(METRICS)}")
        return v

    @model_validator(mode="after")
    def _check_ranges(self):
        checks = [
            (0.0 < self.tau < 1.0, f"tau must be in (0, 1), got {self.tau}"),
            (self.total_steps > 0, f"total_steps must be > 0, got {self.total_steps}"),
            (0 <= self.split_index <= 4, f"split_index must be in 0..4, got {self.split_index}"),
            (0.0 < self.ema_decay < 1.0, f"ema_decay must be in (0, 1), got {self.ema_decay}"),
            (self.lr0 > 0, f"lr0 must be > 0, got {self.lr0}"),
            (0.0 <= self.momentum < 1.0, f"momentum must be in [0, 1), got {self.momentum}"),
            (self.weight_decay >= 0, f"weight_decay must be >= 0, got {self.weight_decay}"),
            (self.lambda_u >= 0 and self.lambda_r >= 0, "loss weights must be >= 0"),
            (self.B_s >= 1 and self.mu >= 1, "B_s and mu must be >= 1"),
            (self.labels_per_class >= 1, "labels_per_class must be >= 1"),
            (self.samples_per_class > self.labels_per_class,
             "samples_per_class must leave unlabeled samples after the labeled split"),
            (self.num_classes >= 2, "num_classes must be >= 2"),
            (self.log_every >= 1 and self.eval_every >= 0, "log_every must be >= 1 and eval_every >= 0"),
            (self.workers >= 0 and self.eval_batch_size >= 1, "workers must be >= 0, eval_batch_size >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)
        return self

    @property
    def B_u(self) -> int:
        return self.mu * self.B_s

    def arch(self) -> ModelArch:
        return ModelArch(num_classes=self.num_classes, width=self.width, proj_dim=self.proj_dim,
                         proj_head=self.proj_head, dist_placement=self.dist_placement,
                         image_size=self.image_size)

    def augment(self) -> AugmentConfig:
        return AugmentConfig(crop_pad=self.crop_pad, cutout_side=self.cutout_side,
                             with_replacement=self.strong_replacement)

    def resolved_text(self) -> str:
        return format_config(self.model_dump())


def _truthy(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def build_config(file_values: Optional[Mapping[str, object]] = None,
                 overrides: Optional[Mapping[str, object]] = None) -> TrainConfig:
    """
    按分层顺序合并配置

    :param file_values: 配置文件中的键值
    :param overrides: 命令行覆盖
    :return: 校验后的 TrainConfig
    """
    explicit: Dict[str, object] = dict(file_values or {})
    explicit.update(overrides or {})
    unknown = sorted(set(explicit) - set(TrainConfig.model_fields))
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")

    merged: Dict[str, object] = {}
    if _truthy(explicit.get("desk_profile", False)):
        merged.update(DESK_PROFILE)
    merged.update(explicit)
    try:
        return TrainConfig(**merged)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}"
                             for err in e.errors())
        raise ConfigError(f"invalid config: {problems}") from e


def load_config(path=None, overrides: Optional[Mapping[str, object]] = None) -> TrainConfig:
    file_values = read_config_file(path) if path else {}
    return build_config(file_values, overrides)


def write_resolved(cfg: TrainConfig, out_dir) -> Path:
    path = Path(out_dir) / RESOLVED_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(cfg.resolved_text(), encoding="utf-8")
    logger.info(f"📝 配置已写入: {path}")
    return path
