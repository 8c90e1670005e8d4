"""
参数的指数滑动平均 (评估使用)
"""

from typing import Dict

import numpy as np

from model.network import ModelArch, ModelState
from tensorcore import Tensor


class EmaError(ValueError):
    """EMA 参数错误"""


def _check_decay(decay: float):
    if not 0.0 < decay < 1.0:
        raise EmaError(f"ema decay must be in (0, 1), got {decay}")


class EmaState:
    """每个参数的影子副本"""

    def __init__(self, arch: ModelArch, shadow: Dict[str, np.ndarray], decay: float):
        _check_decay(decay)
        self.arch = arch
        self.shadow = shadow
        self.decay = decay

    @classmethod
    def from_state(cls, state: ModelState, decay: float) -> "EmaState":
        return cls(state.arch, {name: p.data.copy() for name, p in state.params.items()}, decay)

    def update(self, state: ModelState):
        ema_update(self, state, self.decay)

    def as_state(self) -> ModelState:
        """用影子参数构造 ModelState (不需要梯度)"""
        params = {name: Tensor.wrap(data.copy(), name=name) for name, data in self.shadow.items()}
        return ModelState(self.arch, params)


def ema_update(ema: EmaState, state: ModelState, decay: float):
    """
    shadow <- decay * shadow + (1 - decay) * param

    :param ema: 影子参数
    :param state: 当前参数 (不会被修改)
    :param decay: 衰减系数, (0, 1)
    """
    _check_decay(decay)
    if set(ema.shadow) != set(state.params):
        raise EmaError("ema shadow and model parameters have different names")
    for name, param in state.params.items():
        shadow = ema.shadow[name]
        if shadow.shape != param.shape:
            raise EmaError(f"{name}: shadow shape {shadow.shape} != param shape {param.shape}")
        d = shadow.dtype.type(decay)
        shadow *= d
        shadow += (shadow.dtype.type(1) - d) * param.data.astype(shadow.dtype, copy=False)
