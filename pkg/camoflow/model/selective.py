"""
Selective kernel feature extraction

- MAC: one shared conv (C -> C/N) fanned out through N activations, each
  scaled by a trainable alpha and concatenated back to C channels
- MSKM: dilated 7x7 MAC, 1x1 conv and normal 7x7 MAC branches, reweighted
  by sigmoid selection maps computed from channel max/mean of their concat,
  gated by a 1x1 conv of the input and projected back to C channels
- ExtractStack: `depth` residual blocks per pyramid level
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from camoflow.autograd import functional as F
from camoflow.autograd.module import Conv2d, Module, ModuleList, Parameter
from camoflow.autograd.tensor import Tensor, default_dtype
from camoflow.exceptions import ConfigurationError, DimensionError

DEFAULT_MAC_KINDS = ('relu', 'gelu', 'tanh', 'sigmoid')


class MAC(Module):
    """
    Multi-activation convolution, shape-preserving

    Args:
        channels: C, divisible by len(kinds)
        kinds: Activation per branch
        kernel_size: Odd kernel size k
        dilation: Dilation d; padding is d*(k-1)/2
        rng: Generator for weight init

    Raises:
        ConfigurationError: If C is not divisible by the number of branches
    """

    def __init__(
        self,
        channels: int,
        kinds: Sequence[str] = DEFAULT_MAC_KINDS,
        kernel_size: int = 7,
        dilation: int = 1,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        if not kinds:
            raise ConfigurationError("MAC needs at least one activation kind")
        if channels % len(kinds):
            raise ConfigurationError(
                f"MAC: channels ({channels}) must be divisible by the number of activations ({len(kinds)})"
            )
        self.channels = channels
        self.kinds = tuple(kinds)
        self.shared = Conv2d(channels, channels // len(kinds), kernel_size, dilation=dilation, rng=rng)
        self.alpha = Parameter(np.ones((1, len(kinds), 1, 1), dtype=default_dtype()))

    def forward(self, z: Tensor) -> Tensor:
        if z.ndim != 4 or z.shape[1] != self.channels:
            raise DimensionError(f"mac_forward: expected {self.channels} channels, got shape {z.shape}")
        shared = self.shared(z)
        branches = [
            F.activation(shared, kind) * F.channel_slice(self.alpha, n, n + 1)
            for n, kind in enumerate(self.kinds)
        ]
        return F.concat_channels(branches)


@dataclass
class MskmState:
    """Intermediate tensors of one MSKM forward pass"""
    g1: Tensor
    g2: Tensor
    g3: Tensor
    g: Tensor
    S: Tensor
    gp: Tensor
    m: Tensor


class MskmBlock(Module):
    """
    Multi-activation selective kernel module

    g1 = dilated MAC 7x7 (d=2), g2 = conv1x1, g3 = MAC 7x7 (d=1)
    S  = sigmoid(conv3x3([max_c(g), mean_c(g)])), one map per branch
    g' = [S1*g1, S2*g2, S3*g3]
    m  = conv1x1_proj(conv1x1_gate(z) * g')
    """

    def __init__(
        self,
        channels: int,
        kinds: Sequence[str] = DEFAULT_MAC_KINDS,
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.mac_a = MAC(channels, kinds, 7, dilation=2, rng=rng)
        self.point = Conv2d(channels, channels, 1, rng=rng)
        self.mac_n = MAC(channels, kinds, 7, dilation=1, rng=rng)
        self.select = Conv2d(2, 3, 3, rng=rng)
        self.gate = Conv2d(channels, 3 * channels, 1, rng=rng)
        self.project = Conv2d(3 * channels, channels, 1, rng=rng)

    def forward_with_state(self, z: Tensor) -> MskmState:
        """
        Run the block and keep every intermediate

        Raises:
            DimensionError: If the input is not rank 4 with the block width
        """
        if z.ndim != 4 or z.shape[1] != self.channels:
            raise DimensionError(f"mskm_forward: expected {self.channels} channels, got shape {z.shape}")

        g1 = self.mac_a(z)
        g2 = self.point(z)
        g3 = self.mac_n(z)
        g = F.concat_channels([g1, g2, g3])
        pooled = F.concat_channels([F.channel_reduce(g, 'max'), F.channel_reduce(g, 'mean')])
        S = F.sigmoid(self.select(pooled))
        gp = F.concat_channels([
            F.eltwise(branch, F.channel_slice(S, i, i + 1), 'mul')
            for i, branch in enumerate((g1, g2, g3))
        ])
        m = self.project(F.eltwise(self.gate(z), gp, 'mul'))
        return MskmState(g1=g1, g2=g2, g3=g3, g=g, S=S, gp=gp, m=m)

    def forward(self, z: Tensor) -> Tensor:
        return self.forward_with_state(z).m


class PlainBlock(Module):
    """Ablation substitute for MskmBlock: conv3x3 + activation"""

    def __init__(self, channels: int, activation: str = 'gelu', rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.activation = activation
        self.conv = Conv2d(channels, channels, 3, rng=rng)

    def forward(self, z: Tensor) -> Tensor:
        return F.activation(self.conv(z), self.activation)


class ExtractStack(ModuleList):
    """
    One residual block chain per pyramid level

    Child i holds the `depth` blocks applied to z_{i+1}; every block is
    wrapped as x <- block(x) + x.
    """

    def __init__(
        self,
        widths: Sequence[int],
        depth: int,
        block_factory: Callable[[int], Module],
    ):
        if depth < 1:
            raise ConfigurationError(f"mskm_depth must be >= 1, got {depth}")
        super().__init__(
            ModuleList(block_factory(width) for _ in range(depth)) for width in widths
        )
        self.depth = depth

    def forward(self, levels: Sequence[Tensor]) -> Tuple[Tensor, ...]:
        if len(levels) != len(self):
            raise DimensionError(f"extract_stack: expected {len(self)} levels, got {len(levels)}")
        outputs: List[Tensor] = []
        for blocks, z in zip(self, levels):
            m = z
            for block in blocks:
                m = block(m) + m
            outputs.append(m)
        return tuple(outputs)


def mskm_stack(widths: Sequence[int], depth: int, kinds: Sequence[str], rng: np.random.Generator) -> ExtractStack:
    return ExtractStack(widths, depth, lambda width: MskmBlock(width, kinds, rng))


def plain_stack(widths: Sequence[int], depth: int, activation: str, rng: np.random.Generator) -> ExtractStack:
    return ExtractStack(widths, depth, lambda width: PlainBlock(width, activation, rng))
