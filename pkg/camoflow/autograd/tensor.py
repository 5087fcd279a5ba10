"""
Tensor and reverse-mode tape

Core array type for the network:
- Tensor wraps a dense numpy array and optionally records the op that built it
- Function subclasses implement forward/backward on raw arrays
- backward() walks the recorded graph in reverse topological order
- no_grad() and precision() are thread-local switches
"""

import threading
from contextlib import contextmanager
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from camoflow.exceptions import StateError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[Any]]

_state = threading.local()


def is_grad_enabled() -> bool:
    """Whether new ops record themselves on the tape in this thread"""
    return getattr(_state, 'grad_enabled', True)


def default_dtype() -> np.dtype:
    """Floating dtype used for freshly created tensors in this thread"""
    return getattr(_state, 'dtype', np.dtype(np.float32))


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable graph recording inside the block

    Example:
        >>> with no_grad():
        ...     masks = model(images)
    """
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def precision(dtype: Any) -> Iterator[None]:
    """Switch the default floating dtype for tensors created in the block"""
    previous = default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = previous


def _as_array(data: Any, dtype: Optional[Any]) -> np.ndarray:
    if dtype is not None:
        return np.asarray(data, dtype=dtype)
    if isinstance(data, (np.ndarray, np.generic)) and data.dtype.kind == 'f':
        return np.asarray(data)
    return np.asarray(data, dtype=default_dtype())


class Tensor:
    """
    Dense real array with optional gradient tape participation

    Attributes:
        data: Underlying numpy array
        requires_grad: Whether gradients are accumulated for this tensor
        grad: Accumulated gradient (same shape as data) or None
    """

    __array_priority__ = 100

    def __init__(self, data: Any, requires_grad: bool = False, dtype: Optional[Any] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = _as_array(data, dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx: Optional["Function"] = None

    # ------------------------------------------------------------------
    # Introspection
    # ------------------------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise StateError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """New tensor sharing data with no history"""
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # ------------------------------------------------------------------
    # Arithmetic (numpy broadcasting)
    # ------------------------------------------------------------------

    def _wrap(self, other: ArrayLike) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.dtype))

    def __add__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Add
        return Add.apply(self, self._wrap(other))

    def __radd__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Add
        return Add.apply(self._wrap(other), self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Sub
        return Sub.apply(self, self._wrap(other))

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Sub
        return Sub.apply(self._wrap(other), self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Mul
        return Mul.apply(self, self._wrap(other))

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Mul
        return Mul.apply(self._wrap(other), self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Div
        return Div.apply(self, self._wrap(other))

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        from camoflow.autograd.functional import Div
        return Div.apply(self._wrap(other), self)

    def __neg__(self) -> "Tensor":
        from camoflow.autograd.functional import Neg
        return Neg.apply(self)

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        from camoflow.autograd.functional import Sum
        return Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        from camoflow.autograd.functional import Mean
        return Mean.apply(self, axis=axis, keepdims=keepdims)

    # ------------------------------------------------------------------
    # Reverse mode
    # ------------------------------------------------------------------

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Accumulate gradients into every leaf that requires them

        Args:
            grad: Seed gradient; defaults to ones for a single-element tensor

        Raises:
            StateError: If the tensor is not part of a graph or the seed is ambiguous
        """
        if not self.requires_grad:
            raise StateError("backward() called on a tensor that does not require grad")
        if grad is None:
            if self.data.size != 1:
                raise StateError(
                    f"backward() needs an explicit seed for a tensor of shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=self.dtype)

        pending = {id(self): grad}
        for node in reversed(_topological_order(self)):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if node._ctx is None:
                node.grad = node_grad if node.grad is None else node.grad + node_grad
                continue
            ctx = node._ctx
            for parent, parent_grad in zip(ctx.inputs, ctx.backward(node_grad)):
                if parent is None or parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = np.asarray(parent_grad, dtype=parent.dtype)
                key = id(parent)
                pending[key] = parent_grad if key not in pending else pending[key] + parent_grad


def _topological_order(root: Tensor) -> List[Tensor]:
    """Post-order of the graph below root (inputs before outputs)"""
    order: List[Tensor] = []
    visited = set()
    stack: List[Tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in node._ctx.inputs:
                if parent is not None and parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


class Function:
    """
    Differentiable operation on raw arrays

    Subclasses implement forward(*arrays, **kwargs) and backward(grad),
    returning one gradient (or None) per tensor input.
    """

    def __init__(self) -> None:
        self.inputs: Tuple[Optional[Tensor], ...] = ()
        self.needs_input_grad: Tuple[bool, ...] = ()

    @classmethod
    def apply(cls, *inputs: Optional[Tensor], **kwargs: Any) -> Tensor:
        ctx = cls()
        arrays = [t.data if t is not None else None for t in inputs]
        out = Tensor(ctx.forward(*arrays, **kwargs))
        if is_grad_enabled() and any(t is not None and t.requires_grad for t in inputs):
            ctx.inputs = inputs
            ctx.needs_input_grad = tuple(t is not None and t.requires_grad for t in inputs)
            out.requires_grad = True
            out._ctx = ctx
        return out

    def forward(self, *arrays: Any, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError
