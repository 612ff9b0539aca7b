"""Minimal dense tensor kernel with reverse-mode gradients."""
from app.tensor.core import (
    CHECK_DTYPE,
    DEFAULT_DTYPE,
    DimensionError,
    NonFiniteError,
    Parameter,
    Tensor,
    as_tensor,
)
from app.tensor.gradcheck import grad_check, relative_error
from app.tensor.ops import (
    abs_,
    bilinear_sample,
    clamp,
    concat,
    gather,
    linear_map,
    pad2d,
    relu,
    sigmoid,
    softmax,
)

__all__ = [
    "CHECK_DTYPE",
    "DEFAULT_DTYPE",
    "DimensionError",
    "NonFiniteError",
    "Parameter",
    "Tensor",
    "abs_",
    "as_tensor",
    "bilinear_sample",
    "clamp",
    "concat",
    "gather",
    "grad_check",
    "linear_map",
    "pad2d",
    "relative_error",
    "relu",
    "sigmoid",
    "softmax",
]
