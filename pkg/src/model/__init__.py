from model.network import (
    NUM_ROTATIONS,
    FeatureBundle,
    ModelArch,
    ModelState,
    forward,
    init_params,
    rot_forward,
)
from model.ema import EmaError, EmaState, ema_update
from model.checkpoint import CheckpointError, load_checkpoint, read_tensors, save_checkpoint, write_tensors

__all__ = [
    "NUM_ROTATIONS",
    "FeatureBundle",
    "ModelArch",
    "ModelState",
    "forward",
    "init_params",
    "rot_forward",
    "EmaError",
    "EmaState",
    "ema_update",
    "CheckpointError",
    "load_checkpoint",
    "read_tensors",
    "save_checkpoint",
    "write_tensors",
]
