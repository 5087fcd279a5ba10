"""
Parameter containers

Modules register Parameters and child Modules by attribute assignment and
expose them under stable dotted names (e.g. "mskm.2.0.mac_a.alpha").
"""

from collections import OrderedDict
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from camoflow.autograd import functional as F
from camoflow.autograd.tensor import Tensor, default_dtype
from camoflow.exceptions import FormatError


class Parameter(Tensor):
    """Trainable tensor with a dotted name assigned by Module.bind_names()"""

    def __init__(self, data: Any, name: str = ''):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter(name={self.name!r}, shape={self.shape}, dtype={self.dtype})"


class Module:
    """
    Base class for network components

    Example:
        >>> class Head(Module):
        ...     def __init__(self, rng):
        ...         super().__init__()
        ...         self.conv = Conv2d(8, 1, 1, rng=rng)
        ...     def forward(self, x):
        ...         return self.conv(x)
    """

    def __init__(self) -> None:
        object.__setattr__(self, '_parameters', OrderedDict())
        object.__setattr__(self, '_modules', OrderedDict())

    def __setattr__(self, name: str, value: Any) -> None:
        params: Dict[str, Parameter] = self.__dict__.get('_parameters')
        modules: Dict[str, Module] = self.__dict__.get('_modules')
        if params is None or modules is None:
            raise AttributeError("Module.__init__() must run before assigning attributes")
        params.pop(name, None)
        modules.pop(name, None)
        if isinstance(value, Parameter):
            params[name] = value
        elif isinstance(value, Module):
            modules[name] = value
        object.__setattr__(self, name, value)

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    # ------------------------------------------------------------------
    # Traversal
    # ------------------------------------------------------------------

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Parameter]]:
        for name, param in self._parameters.items():
            yield prefix + name, param
        for name, module in self._modules.items():
            yield from module.named_parameters(prefix + name + '.')

    def named_modules(self, prefix: str = '') -> Iterator[Tuple[str, "Module"]]:
        yield prefix.rstrip('.'), self
        for name, module in self._modules.items():
            yield from module.named_modules(prefix + name + '.')

    def parameters(self) -> List[Parameter]:
        return [param for _, param in self.named_parameters()]

    def bind_names(self) -> "Module":
        """Store each parameter's dotted path on the parameter itself"""
        for name, param in self.named_parameters():
            param.name = name
        return self

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.grad = None

    def num_parameters(self) -> int:
        return sum(param.size for param in self.parameters())

    def astype(self, dtype: Any) -> "Module":
        """Cast every parameter in place (used for double-precision checks)"""
        for param in self.parameters():
            param.data = param.data.astype(dtype)
            param.grad = None
        return self

    # ------------------------------------------------------------------
    # State
    # ------------------------------------------------------------------

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((name, param.data.copy()) for name, param in self.named_parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Copy arrays into parameters by name

        Raises:
            FormatError: Naming the first parameter that is missing or mis-shaped
        """
        own = OrderedDict(self.named_parameters())
        for name, param in own.items():
            if name not in state:
                raise FormatError(f"Parameter '{name}' missing from state")
            array = np.asarray(state[name])
            if array.size != param.size or _padded(array.shape) != _padded(param.shape):
                raise FormatError(
                    f"Parameter '{name}' has shape {array.shape} in state but {param.shape} in model"
                )
        for name in state:
            if name not in own:
                raise FormatError(f"Parameter '{name}' in state does not exist in the model")
        for name, param in own.items():
            param.data = np.asarray(state[name]).reshape(param.shape).astype(param.dtype)
            param.grad = None


def _padded(shape: Tuple[int, ...]) -> Tuple[int, ...]:
    return tuple(shape) + (1,) * (4 - len(shape))


class ModuleList(Module):
    """Ordered container whose children are named "0", "1", ..."""

    def __init__(self, modules: Optional[Iterable[Module]] = None):
        super().__init__()
        for module in modules or ():
            self.append(module)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._modules)), module)

    def __getitem__(self, index: int) -> Module:
        return self._modules[str(index % len(self._modules))]

    def __len__(self) -> int:
        return len(self._modules)

    def __iter__(self) -> Iterator[Module]:
        return iter(list(self._modules.values()))


def _uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(default_dtype())


class Conv2d(Module):
    """
    Convolution layer with uniform(+-1/sqrt(fan_in)) kernels and zero bias

    Padding defaults to dilation*(k-1)/2, which keeps H and W at stride 1.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: Optional[int] = None,
        dilation: int = 1,
        bias: bool = True,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.dilation = dilation
        self.padding = dilation * (kernel_size - 1) // 2 if padding is None else padding
        self.weight = Parameter(
            _uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in)
        )
        self.bias = Parameter(np.zeros(out_channels, dtype=default_dtype())) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.dilation)

    def __repr__(self) -> str:
        return (
            f"Conv2d({self.in_channels}, {self.out_channels}, k={self.kernel_size}, "
            f"stride={self.stride}, padding={self.padding}, dilation={self.dilation})"
        )


class Linear(Module):
    """Affine map (N, in) -> (N, out) with the same init rule as Conv2d"""

    def __init__(self, in_features: int, out_features: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Parameter(_uniform(rng, (out_features, in_features), in_features))
        self.bias = Parameter(np.zeros(out_features, dtype=default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)
