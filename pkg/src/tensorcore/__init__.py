from tensorcore.tensor import (
    BackwardError,
    NumericalError,
    ShapeError,
    Tape,
    Tensor,
    UnknownOpError,
    backward,
    default_dtype,
    no_grad,
    precision,
    zero_grads,
)
from tensorcore.ops import OP_REGISTRY, forward_op
from tensorcore.gradcheck import grad_check

__all__ = [
    "BackwardError",
    "NumericalError",
    "ShapeError",
    "Tape",
    "Tensor",
    "UnknownOpError",
    "backward",
    "default_dtype",
    "no_grad",
    "precision",
    "zero_grads",
    "OP_REGISTRY",
    "forward_op",
    "grad_check",
]
