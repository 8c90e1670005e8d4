from augment.geometry import ImageShapeError
from augment.pipeline import (
    AugmentConfig,
    CutoutParams,
    StrongParams,
    WeakParams,
    apply_cutout,
    apply_strong,
    apply_weak,
    cutout,
    rotate90,
    strong_augment,
    weak_augment,
)
from augment.rng import Rng, derive_seed, make_rng
from augment.transforms import TRANSFORM_TABLE, TRANSFORMS, TransformRangeError, TransformSpec, apply_transform

__all__ = [
    "ImageShapeError",
    "AugmentConfig",
    "CutoutParams",
    "StrongParams",
    "WeakParams",
    "apply_cutout",
    "apply_strong",
    "apply_weak",
    "cutout",
    "rotate90",
    "strong_augment",
    "weak_augment",
    "Rng",
    "derive_seed",
    "make_rng",
    "TRANSFORM_TABLE",
    "TRANSFORMS",
    "TransformRangeError",
    "TransformSpec",
    "apply_transform",
]
