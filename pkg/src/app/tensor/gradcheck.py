"""Finite-difference verification of analytic gradients."""
import logging
from typing import Callable, Optional, Sequence

import numpy as np

from app.tensor.core import CHECK_DTYPE, DimensionError, NonFiniteError, Tensor

logger = logging.getLogger(__name__)


def relative_error(analytic: float, numeric: float, atol: float = 1e-3) -> float:
    """|a - n| / max(|a|, |n|, atol); ``atol`` keeps near-zero gradients from reading as noise."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), atol)


def grad_check(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-6,
    max_checks: Optional[int] = None,
    seed: int = 0,
    atol: float = 1e-3,
) -> float:
    """
    Compare backward() gradients of a scalar function against central differences.

    Args:
        fn: Deterministic closure returning a scalar tensor built from ``params``.
        params: Leaf tensors (64-bit) whose gradients are checked; perturbed in place.
        h: Finite-difference step.
        max_checks: If set, check at most this many randomly chosen entries per parameter.
        seed: Seed for choosing entries when ``max_checks`` is set.
        atol: Denominator floor for the relative error.

    Returns:
        The worst relative error over all checked entries.

    Raises:
        NonFiniteError: If ``fn`` evaluates to NaN/Inf.
        DimensionError: If ``fn`` is not scalar or a parameter is not 64-bit.
    """
    for p in params:
        if p.dtype != CHECK_DTYPE:
            raise DimensionError(f"grad_check needs {np.dtype(CHECK_DTYPE).name} parameters, got {p.dtype}")
        p.grad = np.zeros_like(p.data)

    out = fn()
    if out.size != 1:
        raise DimensionError(f"grad_check needs a scalar function, got shape {out.shape}")
    out.backward()
    analytic = [np.array(p.grad, copy=True) for p in params]

    def evaluate() -> float:
        value = fn().data
        if not np.all(np.isfinite(value)):
            raise NonFiniteError("function under check produced a non-finite value")
        return float(value.reshape(-1)[0])

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            indices = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
        for i in indices:
            original = flat[i]
            flat[i] = original + h
            upper = evaluate()
            flat[i] = original - h
            lower = evaluate()
            flat[i] = original
            numeric = (upper - lower) / (2.0 * h)
            worst = max(worst, relative_error(float(grad.reshape(-1)[i]), numeric, atol))
    logger.debug(f"grad_check over {len(params)} parameters: worst relative error {worst:.3e}")
    return worst
