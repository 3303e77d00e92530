"""Minimal reverse-mode automatic differentiation.

Provides the Tensor value type, the define-by-run Graph tape and a
finite-difference gradient oracle.
"""

from src.autodiff.tensor import (
    OPS,
    Graph,
    Node,
    Tensor,
    active_graph,
    as_tensor,
    backward,
    forward_op,
    gather,
    log_softmax,
    matmul,
    register_op,
    relu,
    softmax,
)
from src.autodiff.gradcheck import analytic_gradient, finite_diff_check

__all__ = [
    'OPS',
    'Graph',
    'Node',
    'Tensor',
    'active_graph',
    'analytic_gradient',
    'as_tensor',
    'backward',
    'finite_diff_check',
    'forward_op',
    'gather',
    'log_softmax',
    'matmul',
    'register_op',
    'relu',
    'softmax',
]
