"""
Differentiable primitives

Every network equation is composed from the operations in this module:
- Arithmetic with numpy broadcasting and reductions
- conv2d (strided windows + tensordot, tap-wise scatter on backward)
- Bilinear resize (align_corners=False) and mean pooling
- Channel concat/slice, channel max/mean, 2x2 max pooling
- Activations, global pooling projection, coordinate grids
- Zero padding/cropping, clamped logit, BCE with logits
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.special import erf, expit

from camoflow.autograd.tensor import Function, Tensor, default_dtype
from camoflow.exceptions import ConfigurationError, DimensionError

ACTIVATIONS = ('relu', 'gelu', 'tanh', 'sigmoid', 'identity')

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum grad back down to shape after numpy broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _require_rank4(x: Tensor, op: str) -> None:
    if x.ndim != 4:
        raise DimensionError(f"{op}: expected a (N, C, H, W) tensor, got shape {x.shape}")


# ==========================================================================
# Arithmetic
# ==========================================================================

class Add(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return (
            _unbroadcast(grad * self.b, self.a.shape),
            _unbroadcast(grad * self.a, self.b.shape),
        )


class Div(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        return (
            _unbroadcast(grad / self.b, self.a.shape),
            _unbroadcast(-grad * self.a / (self.b * self.b), self.b.shape),
        )


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


def _normalize_axis(axis, ndim: int) -> Optional[Tuple[int, ...]]:
    if axis is None:
        return None
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.shape = x.shape
        self.axis = _normalize_axis(axis, x.ndim)
        self.keepdims = keepdims
        return np.asarray(np.sum(x, axis=self.axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Mean(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.shape = x.shape
        self.axis = _normalize_axis(axis, x.ndim)
        self.keepdims = keepdims
        if self.axis is None:
            self.count = x.size
        else:
            self.count = int(np.prod([x.shape[a] for a in self.axis]))
        return np.asarray(np.mean(x, axis=self.axis, keepdims=keepdims))

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, self.shape).copy(),)


def eltwise(a: Tensor, b: Tensor, op: str) -> Tensor:
    """
    Element-wise mul/add/sub of two rank-4 tensors

    b may broadcast only along the batch or channel axis (size 1).

    Raises:
        DimensionError: If the shapes are not compatible
        ConfigurationError: If op is unknown
    """
    if a.shape != b.shape:
        if a.ndim != 4 or b.ndim != 4:
            raise DimensionError(f"eltwise: cannot combine shapes {a.shape} and {b.shape}")
        for axis, (sa, sb) in enumerate(zip(a.shape, b.shape)):
            if sa != sb and not (sb == 1 and axis in (0, 1)):
                raise DimensionError(
                    f"eltwise: axis {axis} mismatch ({sa} vs {sb}) in shapes {a.shape} and {b.shape}"
                )
    if op == 'mul':
        return Mul.apply(a, b)
    if op == 'add':
        return Add.apply(a, b)
    if op == 'sub':
        return Sub.apply(a, b)
    raise ConfigurationError(f"eltwise: unknown op '{op}'")


# ==========================================================================
# Convolution
# ==========================================================================

def conv_output_size(size: int, kernel: int, stride: int, padding: int, dilation: int) -> int:
    """floor((size + 2p - d(k-1) - 1) / s) + 1"""
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


def _windows(xp: np.ndarray, k: int, ho: int, wo: int, stride: int, dilation: int) -> np.ndarray:
    n, c = xp.shape[:2]
    sn, sc, sh, sw = xp.strides
    return as_strided(
        xp,
        shape=(n, c, ho, wo, k, k),
        strides=(sn, sc, sh * stride, sw * stride, sh * dilation, sw * dilation),
        writeable=False,
    )


class Conv2dFn(Function):
    def forward(self, x, w, b, stride=1, padding=0, dilation=1):
        k = w.shape[2]
        ho = conv_output_size(x.shape[2], k, stride, padding, dilation)
        wo = conv_output_size(x.shape[3], k, stride, padding, dilation)
        if padding:
            xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
        else:
            xp = x
        windows = _windows(xp, k, ho, wo, stride, dilation)
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if b is not None:
            out = out + b.reshape(1, -1, 1, 1)

        self.w = w
        self.windows = windows
        self.padded_shape = xp.shape
        self.has_bias = b is not None
        self.geometry = (k, ho, wo, stride, padding, dilation)
        return np.ascontiguousarray(out)

    def backward(self, grad):
        k, ho, wo, stride, padding, dilation = self.geometry
        grad_x = grad_w = grad_b = None

        if self.needs_input_grad[1]:
            grad_w = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
        if self.has_bias and self.needs_input_grad[2]:
            grad_b = grad.sum(axis=(0, 2, 3))

        if self.needs_input_grad[0]:
            cols = np.tensordot(grad, self.w, axes=([1], [0]))  # (N, Ho, Wo, Cin, k, k)
            grad_xp = np.zeros(self.padded_shape, dtype=grad.dtype)
            h_span = stride * (ho - 1) + 1
            w_span = stride * (wo - 1) + 1
            for i in range(k):
                for j in range(k):
                    top, left = i * dilation, j * dilation
                    grad_xp[:, :, top:top + h_span:stride, left:left + w_span:stride] += (
                        cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            if padding:
                grad_x = grad_xp[:, :, padding:-padding, padding:-padding]
            else:
                grad_x = grad_xp

        return grad_x, grad_w, grad_b


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tensor:
    """
    2-D cross-correlation over a (N, Cin, H, W) batch

    Args:
        x: Input tensor
        weight: Kernel of shape (Cout, Cin, k, k), k odd
        bias: Optional bias of shape (Cout,)
        stride: Step between output samples
        padding: Zero padding on every side
        dilation: Spacing between kernel taps

    Returns:
        Tensor of shape (N, Cout, H', W')

    Raises:
        DimensionError: If an axis of x, weight or bias does not line up
        ConfigurationError: If the kernel/stride/dilation setup is illegal
            or the output would be empty
    """
    _require_rank4(x, 'conv2d')
    if weight.ndim != 4:
        raise DimensionError(f"conv2d: kernel must be (Cout, Cin, k, k), got {weight.shape}")
    cout, cin, kh, kw = weight.shape
    if x.shape[1] != cin:
        raise DimensionError(
            f"conv2d: channel axis (1) of input has {x.shape[1]} but kernel expects {cin}"
        )
    if kh != kw or kh % 2 == 0:
        raise ConfigurationError(f"conv2d: kernel must be square with odd size, got {kh}x{kw}")
    if stride < 1 or dilation < 1 or padding < 0:
        raise ConfigurationError(
            f"conv2d: stride={stride}, dilation={dilation}, padding={padding} is not a legal setup"
        )
    if bias is not None and bias.shape != (cout,):
        raise DimensionError(f"conv2d: bias axis 0 has shape {bias.shape}, expected ({cout},)")
    ho = conv_output_size(x.shape[2], kh, stride, padding, dilation)
    wo = conv_output_size(x.shape[3], kh, stride, padding, dilation)
    if ho < 1 or wo < 1:
        raise ConfigurationError(
            f"conv2d: output size {ho}x{wo} for input {x.shape[2]}x{x.shape[3]}, "
            f"kernel {kh}, stride {stride}, padding {padding}, dilation {dilation}"
        )
    return Conv2dFn.apply(x, weight, bias, stride=stride, padding=padding, dilation=dilation)


# ==========================================================================
# Resampling
# ==========================================================================

def bilinear_matrix(n_in: int, n_out: int, dtype=np.float64) -> np.ndarray:
    """
    Interpolation matrix M (n_out, n_in) so that out = M @ in

    Sample centers follow the align_corners=False convention
    src = (o + 0.5) * n_in / n_out - 0.5, clamped at 0.
    """
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.maximum(src, 0.0)
    lo = np.minimum(np.floor(src).astype(np.int64), n_in - 1)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    matrix = np.zeros((n_out, n_in), dtype=np.float64)
    rows = np.arange(n_out)
    np.add.at(matrix, (rows, lo), 1.0 - frac)
    np.add.at(matrix, (rows, hi), frac)
    return matrix.astype(dtype)


class ResizeFn(Function):
    def forward(self, x, size):
        self.mh = bilinear_matrix(x.shape[2], size[0], x.dtype)
        self.mw = bilinear_matrix(x.shape[3], size[1], x.dtype)
        return np.matmul(np.matmul(self.mh, x), self.mw.T)

    def backward(self, grad):
        return (np.matmul(np.matmul(self.mh.T, grad), self.mw),)


def resize(x: Tensor, size: Tuple[int, int]) -> Tensor:
    """Bilinear resize of a rank-4 tensor to (H', W')"""
    _require_rank4(x, 'resize')
    if size[0] < 1 or size[1] < 1:
        raise ConfigurationError(f"resize: target size {size} must be positive")
    if tuple(size) == x.shape[2:]:
        return x
    return ResizeFn.apply(x, size=tuple(size))


class MeanPoolFn(Function):
    def forward(self, x, factor):
        n, c, h, w = x.shape
        self.factor = factor
        return x.reshape(n, c, h // factor, factor, w // factor, factor).mean(axis=(3, 5))

    def backward(self, grad):
        f = self.factor
        return (np.repeat(np.repeat(grad, f, axis=2), f, axis=3) / (f * f),)


def mean_pool(x: Tensor, factor: int) -> Tensor:
    """
    Non-overlapping factor x factor mean pooling

    Raises:
        DimensionError: If H or W is not divisible by factor
    """
    _require_rank4(x, 'mean_pool')
    h, w = x.shape[2:]
    if h % factor or w % factor:
        raise DimensionError(f"mean_pool: spatial size {h}x{w} is not divisible by {factor}")
    if factor == 1:
        return x
    return MeanPoolFn.apply(x, factor=factor)


def resize2(x: Tensor, direction: str) -> Tensor:
    """
    Factor-2 resampling

    'up' doubles H, W by bilinear interpolation; 'down' halves them with
    2x2 mean pooling and requires even H, W.
    """
    _require_rank4(x, 'resize2')
    if direction == 'up':
        return ResizeFn.apply(x, size=(2 * x.shape[2], 2 * x.shape[3]))
    if direction == 'down':
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise DimensionError(f"resize2 down: spatial size {x.shape[2]}x{x.shape[3]} must be even")
        return MeanPoolFn.apply(x, factor=2)
    raise ConfigurationError(f"resize2: direction must be 'up' or 'down', got '{direction}'")


# ==========================================================================
# Channel plumbing
# ==========================================================================

class ConcatFn(Function):
    def forward(self, *parts):
        self.splits = np.cumsum([p.shape[1] for p in parts])[:-1]
        return np.concatenate(parts, axis=1)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=1))


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    """
    Concatenate tensors along the channel axis, in the given order

    Raises:
        DimensionError: If the parts disagree on N, H or W
    """
    if not parts:
        raise DimensionError("concat_channels: nothing to concatenate")
    for part in parts:
        _require_rank4(part, 'concat_channels')
    first = parts[0].shape
    for index, part in enumerate(parts[1:], start=1):
        if (part.shape[0], part.shape[2], part.shape[3]) != (first[0], first[2], first[3]):
            raise DimensionError(
                f"concat_channels: part {index} has shape {part.shape}, incompatible with {first}"
            )
    if len(parts) == 1:
        return parts[0]
    return ConcatFn.apply(*parts)


class ChannelSliceFn(Function):
    def forward(self, x, start, stop):
        self.shape = x.shape
        self.start, self.stop = start, stop
        return x[:, start:stop].copy()

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        full[:, self.start:self.stop] = grad
        return (full,)


def channel_slice(x: Tensor, start: int, stop: int) -> Tensor:
    """Channels [start, stop) of x"""
    if not 0 <= start < stop <= x.shape[1]:
        raise DimensionError(f"channel_slice: [{start}, {stop}) outside {x.shape[1]} channels")
    return ChannelSliceFn.apply(x, start=start, stop=stop)


class ChannelMaxFn(Function):
    def forward(self, x):
        self.shape = x.shape
        self.index = np.argmax(x, axis=1)[:, None]
        return np.take_along_axis(x, self.index, axis=1)

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        np.put_along_axis(full, self.index, grad, axis=1)
        return (full,)


def channel_reduce(x: Tensor, kind: str) -> Tensor:
    """
    Reduce the channel axis to one channel with 'max' or 'mean'

    Max routes its gradient to the first maximal channel.
    """
    _require_rank4(x, 'channel_reduce')
    if kind == 'max':
        return ChannelMaxFn.apply(x)
    if kind == 'mean':
        return Mean.apply(x, axis=1, keepdims=True)
    raise ConfigurationError(f"channel_reduce: kind must be 'max' or 'mean', got '{kind}'")


class MaxPool2Fn(Function):
    def forward(self, x):
        n, c, h, w = x.shape
        self.shape = x.shape
        windows = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        windows = windows.reshape(n, c, h // 2, w // 2, 4)
        self.index = np.argmax(windows, axis=-1)[..., None]
        return np.take_along_axis(windows, self.index, axis=-1)[..., 0]

    def backward(self, grad):
        n, c, h, w = self.shape
        windows = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad.dtype)
        np.put_along_axis(windows, self.index, grad[..., None], axis=-1)
        windows = windows.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return (windows.reshape(n, c, h, w),)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 stride-2 max pooling; H and W must be even"""
    _require_rank4(x, 'maxpool2')
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise DimensionError(f"maxpool2: spatial size {x.shape[2]}x{x.shape[3]} must be even")
    return MaxPool2Fn.apply(x)


# ==========================================================================
# Activations
# ==========================================================================

class ReluFn(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return (grad * self.mask,)


class GeluFn(Function):
    def forward(self, x):
        self.x = x
        self.cdf = 0.5 * (1.0 + erf(x / _SQRT_2))
        return (x * self.cdf).astype(x.dtype)

    def backward(self, grad):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * self.x * self.x)
        return (grad * (self.cdf + self.x * pdf),)


class TanhFn(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class SigmoidFn(Function):
    def forward(self, x):
        self.out = expit(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


_ACTIVATION_FUNCTIONS = {
    'relu': ReluFn,
    'gelu': GeluFn,
    'tanh': TanhFn,
    'sigmoid': SigmoidFn,
}


def activation(x: Tensor, kind: str) -> Tensor:
    """
    Element-wise nonlinearity

    Args:
        x: Input tensor
        kind: One of relu, gelu, tanh, sigmoid, identity

    Raises:
        ConfigurationError: If kind is unknown
    """
    if kind == 'identity':
        return x
    fn = _ACTIVATION_FUNCTIONS.get(kind)
    if fn is None:
        raise ConfigurationError(f"Unknown activation '{kind}' (expected one of {ACTIVATIONS})")
    return fn.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return SigmoidFn.apply(x)


# ==========================================================================
# Latent plumbing
# ==========================================================================

class LinearFn(Function):
    def forward(self, x, w, b):
        self.x, self.w = x, w
        self.has_bias = b is not None
        out = x @ w.T
        return out + b if b is not None else out

    def backward(self, grad):
        grad_b = grad.sum(axis=0) if self.has_bias else None
        return grad @ self.w, grad.T @ self.x, grad_b


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x @ weight.T + bias for x of shape (N, C) and weight (L, C)"""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {weight.shape}")
    return LinearFn.apply(x, weight, bias)


def global_pool_project(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Spatial mean per channel followed by an affine map to a latent

    Args:
        x: (N, C, H, W) features
        weight: (L, C) projection matrix
        bias: (L,) bias

    Returns:
        Latent of shape (N, L)

    Raises:
        DimensionError: If the projection input width differs from C
    """
    _require_rank4(x, 'global_pool_project')
    if weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise DimensionError(
            f"global_pool_project: projection width {weight.shape} does not match {x.shape[1]} channels"
        )
    return linear(x.mean(axis=(2, 3)), weight, bias)


def coord_grid(h: int, w: int, dtype=None) -> Tensor:
    """
    Normalized coordinate channels of shape (1, 2, h, w)

    Channel 0 holds x = linspace(-1, 1, w) along columns, channel 1 holds
    y = linspace(-1, 1, h) along rows. A length-1 axis yields -1.
    """
    if h < 1 or w < 1:
        raise ConfigurationError(f"coord_grid: size {h}x{w} must be positive")
    dtype = np.dtype(dtype) if dtype is not None else default_dtype()
    xs = np.linspace(-1.0, 1.0, w)
    ys = np.linspace(-1.0, 1.0, h)
    grid = np.empty((1, 2, h, w), dtype=np.float64)
    grid[0, 0] = xs[None, :]
    grid[0, 1] = ys[:, None]
    return Tensor(grid.astype(dtype))


class BroadcastLatentFn(Function):
    def forward(self, z, h, w):
        return np.ascontiguousarray(np.broadcast_to(z[:, :, None, None], z.shape + (h, w)))

    def backward(self, grad):
        return (grad.sum(axis=(2, 3)),)


def broadcast_latent(z: Tensor, h: int, w: int) -> Tensor:
    """Tile a (N, L) latent into a spatially constant (N, L, h, w) tensor"""
    if z.ndim != 2:
        raise DimensionError(f"broadcast_latent: expected (N, L) latent, got {z.shape}")
    return BroadcastLatentFn.apply(z, h=h, w=w)


# ==========================================================================
# Padding
# ==========================================================================

class Pad2dFn(Function):
    def forward(self, x, bottom, right):
        self.size = x.shape[2:]
        return np.pad(x, ((0, 0), (0, 0), (0, bottom), (0, right)))

    def backward(self, grad):
        h, w = self.size
        return (np.ascontiguousarray(grad[:, :, :h, :w]),)


class Crop2dFn(Function):
    def forward(self, x, h, w):
        self.shape = x.shape
        return np.ascontiguousarray(x[:, :, :h, :w])

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        full[:, :, :grad.shape[2], :grad.shape[3]] = grad
        return (full,)


def pad_to_multiple(x: Tensor, multiple: int) -> Tensor:
    """Zero-pad bottom/right so H and W become multiples of `multiple`"""
    _require_rank4(x, 'pad_to_multiple')
    h, w = x.shape[2:]
    bottom = (-h) % multiple
    right = (-w) % multiple
    if bottom == 0 and right == 0:
        return x
    return Pad2dFn.apply(x, bottom=bottom, right=right)


def crop2d(x: Tensor, h: int, w: int) -> Tensor:
    """Top-left (h, w) window of x"""
    _require_rank4(x, 'crop2d')
    if h > x.shape[2] or w > x.shape[3]:
        raise DimensionError(f"crop2d: cannot crop {h}x{w} from {x.shape[2]}x{x.shape[3]}")
    if (h, w) == x.shape[2:]:
        return x
    return Crop2dFn.apply(x, h=h, w=w)


# ==========================================================================
# Loss building blocks
# ==========================================================================

class ClampFn(Function):
    def forward(self, x, low, high):
        self.mask = (x >= low) & (x <= high)
        return np.clip(x, low, high)

    def backward(self, grad):
        return (grad * self.mask,)


def clamp(x: Tensor, low: float, high: float) -> Tensor:
    return ClampFn.apply(x, low=low, high=high)


class LogFn(Function):
    def forward(self, x):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


def log(x: Tensor) -> Tensor:
    return LogFn.apply(x)


def logit(p: Tensor, low: float = 1e-12) -> Tensor:
    """
    Inverse sigmoid of a probability tensor, clamped away from 0 and 1

    The upper clamp is 1 - epsneg of the tensor's dtype so 1 - p stays positive.
    """
    high = 1.0 - float(np.finfo(p.dtype).epsneg)
    q = clamp(p, low, high)
    return log(q) - log(1.0 - q)


class BceWithLogitsFn(Function):
    def forward(self, x, target):
        self.x, self.target = x, target
        return np.maximum(x, 0) - x * target + np.log1p(np.exp(-np.abs(x)))

    def backward(self, grad):
        return grad * (expit(self.x) - self.target), None


def bce_with_logits(logits: Tensor, target: Tensor) -> Tensor:
    """Per-element binary cross-entropy of sigmoid(logits) against target"""
    if logits.shape != target.shape:
        raise DimensionError(f"bce_with_logits: logits {logits.shape} vs target {target.shape}")
    return BceWithLogitsFn.apply(logits, target)
