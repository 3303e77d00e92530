"""Reverse-mode automatic differentiation over dense float64 tensors.

Ops record themselves on the active Graph (a define-by-run tape) whenever one
of their inputs requires gradients. Outside a ``with Graph():`` block ops only
compute values, which is how inference runs.

Example:
    >>> w = Tensor([[1.0, 2.0]], requires_grad=True)
    >>> with Graph() as graph:
    ...     loss = (Tensor([[3.0, 4.0]]) @ w.transpose()).sum()
    ...     graph.backward(loss)
    >>> w.grad
    array([[3., 4.]])
"""
import contextvars
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import GradientError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_active_graph: contextvars.ContextVar[Optional["Graph"]] = contextvars.ContextVar("active_graph", default=None)

Operand = Union["Tensor", np.ndarray, float, int, Sequence[float]]


class Tensor:
    """Dense n-dimensional array of float64 with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data: Any, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # Arithmetic
    def __add__(self, other: Operand) -> "Tensor":
        return forward_op("add", (self, as_tensor(other)))

    def __radd__(self, other: Operand) -> "Tensor":
        return forward_op("add", (as_tensor(other), self))

    def __sub__(self, other: Operand) -> "Tensor":
        return forward_op("sub", (self, as_tensor(other)))

    def __rsub__(self, other: Operand) -> "Tensor":
        return forward_op("sub", (as_tensor(other), self))

    def __mul__(self, other: Operand) -> "Tensor":
        return forward_op("mul", (self, as_tensor(other)))

    def __rmul__(self, other: Operand) -> "Tensor":
        return forward_op("mul", (as_tensor(other), self))

    def __truediv__(self, other: Operand) -> "Tensor":
        return forward_op("div", (self, as_tensor(other)))

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return forward_op("div", (as_tensor(other), self))

    def __neg__(self) -> "Tensor":
        return forward_op("neg", (self,))

    def __matmul__(self, other: Operand) -> "Tensor":
        return forward_op("matmul", (self, as_tensor(other)))

    # Unary and reductions
    def transpose(self) -> "Tensor":
        return forward_op("transpose", (self,))

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return forward_op("sum", (self,), axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return forward_op("mean", (self,), axis=axis, keepdims=keepdims)

    def var(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        return forward_op("var", (self,), axis=axis, keepdims=keepdims)

    def relu(self) -> "Tensor":
        return forward_op("relu", (self,))

    def gelu(self) -> "Tensor":
        return forward_op("gelu", (self,))

    def tanh(self) -> "Tensor":
        return forward_op("tanh", (self,))

    def exp(self) -> "Tensor":
        return forward_op("exp", (self,))

    def log(self) -> "Tensor":
        return forward_op("log", (self,))

    def sqrt(self) -> "Tensor":
        return forward_op("sqrt", (self,))

    def square(self) -> "Tensor":
        return forward_op("square", (self,))

    def softplus(self) -> "Tensor":
        return forward_op("softplus", (self,))

    def softmax(self, axis: int = -1) -> "Tensor":
        return forward_op("softmax", (self,), axis=axis)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        return forward_op("log_softmax", (self,), axis=axis)


def as_tensor(value: Operand) -> Tensor:
    """Wrap a constant as a Tensor that never requires gradients."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


@dataclass
class Node:
    """One recorded op: kind, input tensors, output tensor, saved context."""
    kind: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    ctx: Dict[str, Any] = field(default_factory=dict)


class Graph:
    """Append-only tape of the ops executed while it is active.

    Nodes are appended in execution order, which is a topological order
    (inputs are always produced before their consumers).
    """

    def __init__(self):
        self.nodes: List[Node] = []
        self._produced: Dict[int, int] = {}
        self._token: Optional[contextvars.Token] = None

    def __enter__(self) -> "Graph":
        self._token = _active_graph.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _active_graph.reset(self._token)
        self._token = None

    def record(self, node: Node) -> None:
        self._produced[id(node.output)] = len(self.nodes)
        self.nodes.append(node)

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into the ``grad`` slot of every leaf.

        Leaves are tensors with ``requires_grad`` that were not produced on this
        graph. Gradients accumulate across calls; call ``zero_grad`` on the
        leaves to reset them.

        Args:
            loss: Scalar tensor produced on this graph

        Raises:
            GradientError: If loss is not a scalar or was not recorded here
        """
        if loss.size != 1:
            raise GradientError(f"backward: loss must be a scalar, got shape {loss.shape}")
        if id(loss) not in self._produced:
            raise GradientError("backward: loss was not produced on this graph")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            input_grads = OPS[node.kind].backward(node, upstream)
            for tensor, grad in zip(node.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                grad = _unbroadcast(grad, tensor.shape)
                key = id(tensor)
                if key in self._produced:
                    grads[key] = grads[key] + grad if key in grads else grad
                elif tensor.grad is None:
                    tensor.grad = grad.copy()
                else:
                    tensor.grad = tensor.grad + grad
        logger.debug(f"backward visited {len(self.nodes)} nodes")


def active_graph() -> Optional[Graph]:
    return _active_graph.get()


def backward(graph: Graph, loss: Tensor) -> None:
    """Functional form of ``graph.backward(loss)``."""
    graph.backward(loss)


# Op registry

@dataclass(frozen=True)
class OpDef:
    forward: Callable[..., Tuple[np.ndarray, Dict[str, Any]]]
    backward: Callable[[Node, np.ndarray], Tuple[Optional[np.ndarray], ...]]
    check: Optional[Callable[..., None]] = None


OPS: Dict[str, OpDef] = {}


def register_op(kind: str, forward: Callable, backward: Callable, check: Optional[Callable] = None) -> None:
    """Register an op kind with its forward and backward rules."""
    OPS[kind] = OpDef(forward=forward, backward=backward, check=check)


def forward_op(kind: str, inputs: Sequence[Tensor], **attrs: Any) -> Tensor:
    """Run op ``kind`` on ``inputs`` and record it on the active graph.

    Raises:
        ShapeError: If the input shapes are incompatible for ``kind``
        NonFiniteError: If the result contains NaN or infinity
    """
    if kind not in OPS:
        raise KeyError(f"Unknown op kind: {kind}")
    op = OPS[kind]
    inputs = tuple(inputs)
    if op.check is not None:
        op.check(kind, *(t.shape for t in inputs), **attrs)
    values, ctx = op.forward(*(t.data for t in inputs), **attrs)
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"{kind} produced non-finite values for input shapes {[t.shape for t in inputs]}")
    requires_grad = any(t.requires_grad for t in inputs)
    out = Tensor(values, requires_grad=requires_grad)
    graph = _active_graph.get()
    if graph is not None and requires_grad:
        ctx.update(attrs)
        graph.record(Node(kind=kind, inputs=inputs, output=out, ctx=ctx))
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that were broadcast to reach its shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(kind: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> None:
    # Same shape, a scalar, or one operand broadcast into the other's shape
    if a == b or a in ((), (1,)) or b in ((), (1,)):
        return
    try:
        result = np.broadcast_shapes(a, b)
    except ValueError:
        result = None
    if result is None or result not in (a, b) or max(len(a), len(b)) > 2:
        raise ShapeError(f"{kind}: incompatible shapes {a} and {b}")


def _check_matmul(kind: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> None:
    if len(a) != 2 or len(b) != 2 or a[1] != b[0]:
        raise ShapeError(f"{kind}: incompatible shapes {a} and {b}")


def _check_matrix(kind: str, a: Tuple[int, ...], **attrs: Any) -> None:
    if len(a) != 2:
        raise ShapeError(f"{kind}: expected a matrix, got shape {a}")


def _expand(grad: np.ndarray, shape: Tuple[int, ...], axis: Optional[int], keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        grad = np.expand_dims(grad, axis)
    return np.broadcast_to(grad, shape)


def _reduced_count(shape: Tuple[int, ...], axis: Optional[int]) -> int:
    return int(np.prod(shape)) if axis is None else shape[axis]


# Elementwise binary ops

register_op(
    "add",
    lambda a, b: (a + b, {}),
    lambda node, g: (g, g),
    _check_broadcast,
)
register_op(
    "sub",
    lambda a, b: (a - b, {}),
    lambda node, g: (g, -g),
    _check_broadcast,
)
register_op(
    "mul",
    lambda a, b: (a * b, {}),
    lambda node, g: (g * node.inputs[1].data, g * node.inputs[0].data),
    _check_broadcast,
)
register_op(
    "div",
    lambda a, b: (a / b, {}),
    lambda node, g: (
        g / node.inputs[1].data,
        -g * node.inputs[0].data / np.square(node.inputs[1].data),
    ),
    _check_broadcast,
)
register_op(
    "matmul",
    lambda a, b: (a @ b, {}),
    lambda node, g: (g @ node.inputs[1].data.T, node.inputs[0].data.T @ g),
    _check_matmul,
)

# Elementwise unary ops

register_op("neg", lambda a: (-a, {}), lambda node, g: (-g,))
register_op("transpose", lambda a: (a.T.copy(), {}), lambda node, g: (g.T,), _check_matrix)
register_op(
    "relu",
    lambda a: (np.maximum(a, 0.0), {}),
    lambda node, g: (g * (node.inputs[0].data > 0.0),),
)
register_op(
    "tanh",
    lambda a: (np.tanh(a), {}),
    lambda node, g: (g * (1.0 - np.square(node.output.data)),),
)
register_op(
    "exp",
    lambda a: (np.exp(a), {}),
    lambda node, g: (g * node.output.data,),
)
register_op(
    "square",
    lambda a: (np.square(a), {}),
    lambda node, g: (g * 2.0 * node.inputs[0].data,),
)


def _log_forward(a: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
    if np.any(a <= 0.0):
        raise NonFiniteError("log: input has non-positive entries")
    return np.log(a), {}


def _sqrt_forward(a: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
    if np.any(a < 0.0):
        raise NonFiniteError("sqrt: input has negative entries")
    return np.sqrt(a), {}


register_op("log", _log_forward, lambda node, g: (g / node.inputs[0].data,))
register_op("sqrt", _sqrt_forward, lambda node, g: (g * 0.5 / node.output.data,))
register_op(
    "softplus",
    lambda a: (np.logaddexp(0.0, a), {}),
    lambda node, g: (g / (1.0 + np.exp(-node.inputs[0].data)),),
)

_GELU_C = np.sqrt(2.0 / np.pi)


def _gelu_forward(a: np.ndarray) -> Tuple[np.ndarray, Dict[str, Any]]:
    inner = _GELU_C * (a + 0.044715 * a ** 3)
    t = np.tanh(inner)
    return 0.5 * a * (1.0 + t), {"t": t}


def _gelu_backward(node: Node, g: np.ndarray) -> Tuple[np.ndarray]:
    a = node.inputs[0].data
    t = node.ctx["t"]
    d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * a ** 2)
    return (g * (0.5 * (1.0 + t) + 0.5 * a * (1.0 - t ** 2) * d_inner),)


register_op("gelu", _gelu_forward, _gelu_backward)

# Reductions (saved forward context instead of recomputation)


def _sum_forward(a, axis=None, keepdims=False):
    return np.sum(a, axis=axis, keepdims=keepdims), {"n": _reduced_count(a.shape, axis)}


def _mean_forward(a, axis=None, keepdims=False):
    return np.mean(a, axis=axis, keepdims=keepdims), {"n": _reduced_count(a.shape, axis)}


def _var_forward(a, axis=None, keepdims=False):
    centered = a - np.mean(a, axis=axis, keepdims=True)
    n = _reduced_count(a.shape, axis)
    return np.mean(np.square(centered), axis=axis, keepdims=keepdims), {"centered": centered, "n": n}


register_op(
    "sum",
    _sum_forward,
    lambda node, g: (_expand(g, node.inputs[0].shape, node.ctx["axis"], node.ctx["keepdims"]),),
)
register_op(
    "mean",
    lambda a, axis=None, keepdims=False: _mean_forward(a, axis, keepdims),
    lambda node, g: (_expand(g, node.inputs[0].shape, node.ctx["axis"], node.ctx["keepdims"]) / node.ctx["n"],),
)
register_op(
    "var",
    lambda a, axis=None, keepdims=False: _var_forward(a, axis, keepdims),
    lambda node, g: (
        _expand(g, node.inputs[0].shape, node.ctx["axis"], node.ctx["keepdims"])
        * 2.0 * node.ctx["centered"] / node.ctx["n"],
    ),
)

# Softmax family


def _log_softmax_forward(a, axis=-1):
    shifted = a - np.max(a, axis=axis, keepdims=True)
    out = shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    return out, {}


def _softmax_forward(a, axis=-1):
    shifted = np.exp(a - np.max(a, axis=axis, keepdims=True))
    return shifted / np.sum(shifted, axis=axis, keepdims=True), {}


register_op(
    "log_softmax",
    _log_softmax_forward,
    lambda node, g: (g - np.exp(node.output.data) * np.sum(g, axis=node.ctx["axis"], keepdims=True),),
)
register_op(
    "softmax",
    _softmax_forward,
    lambda node, g: (
        node.output.data * (g - np.sum(g * node.output.data, axis=node.ctx["axis"], keepdims=True)),
    ),
)


def _gather_check(kind, a, index=None):
    if len(a) != 2:
        raise ShapeError(f"{kind}: expected a matrix, got shape {a}")
    if index is None or np.shape(index) != (a[0],):
        raise ShapeError(f"{kind}: incompatible shapes {a} and {np.shape(index)}")


def _gather_forward(a, index=None):
    rows = np.arange(a.shape[0])
    return a[rows, index], {"rows": rows}


def _gather_backward(node, g):
    grad = np.zeros_like(node.inputs[0].data)
    grad[node.ctx["rows"], node.ctx["index"]] = g
    return (grad,)


register_op("gather", _gather_forward, _gather_backward, _gather_check)


def gather(x: Tensor, index: np.ndarray) -> Tensor:
    """Pick ``x[i, index[i]]`` for every row i of a matrix."""
    return forward_op("gather", (x,), index=np.asarray(index, dtype=np.int64))


def matmul(a: Operand, b: Operand) -> Tensor:
    return forward_op("matmul", (as_tensor(a), as_tensor(b)))


def relu(x: Tensor) -> Tensor:
    return x.relu()


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return x.softmax(axis=axis)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return x.log_softmax(axis=axis)
