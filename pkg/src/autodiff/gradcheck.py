"""Central finite-difference oracle for analytic gradients."""
import logging
from typing import Callable

import numpy as np

from src.autodiff.tensor import Graph, Tensor
from src.errors import GradientError

logger = logging.getLogger(__name__)


def _evaluate(f: Callable[[Tensor], Tensor], data: np.ndarray) -> float:
    value = f(Tensor(data, requires_grad=False))
    if value.size != 1:
        raise GradientError(f"finite_diff_check: f must be scalar-valued, got shape {value.shape}")
    result = value.item()
    if not np.isfinite(result):
        raise GradientError("finite_diff_check: f(x) is not finite")
    return result


def analytic_gradient(f: Callable[[Tensor], Tensor], x: Tensor) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` through the tape."""
    leaf = Tensor(x.data, requires_grad=True)
    with Graph() as graph:
        value = f(leaf)
        if value.size != 1:
            raise GradientError(f"finite_diff_check: f must be scalar-valued, got shape {value.shape}")
        if not np.isfinite(value.item()):
            raise GradientError("finite_diff_check: f(x) is not finite")
        if value.requires_grad:
            graph.backward(value)
    return leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-5) -> float:
    """Compare the analytic gradient of ``f`` against central differences.

    Args:
        f: Scalar-valued function of one tensor
        x: Point at which to check
        step: Finite-difference step (> 0)

    Returns:
        max over coordinates of |analytic - central| / max(|analytic|, |central|, 1e-12)

    Raises:
        GradientError: If step <= 0 or f is non-scalar or non-finite
    """
    if step <= 0:
        raise GradientError(f"finite_diff_check: step must be positive, got {step}")
    _evaluate(f, x.data)
    analytic = analytic_gradient(f, x).reshape(-1)

    base = x.data.reshape(-1)
    worst = 0.0
    for i in range(base.size):
        plus = base.copy()
        minus = base.copy()
        plus[i] += step
        minus[i] -= step
        central = (_evaluate(f, plus.reshape(x.shape)) - _evaluate(f, minus.reshape(x.shape))) / (2.0 * step)
        denom = max(abs(analytic[i]), abs(central), 1e-12)
        worst = max(worst, abs(analytic[i] - central) / denom)
    logger.debug(f"finite_diff_check over {base.size} coordinates: max relative error {worst:.3e}")
    return worst
