"""
Pyramid encoder

A small trainable 4-stage convolutional pyramid standing in for a
pretrained transformer backbone. A stride-2 stem plus four stride-2 stages
put the stage outputs at strides 4/8/16/32; the last stage is pooled and
projected to the global latent fx (omitted when nothing consumes it).
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from camoflow.autograd import functional as F
from camoflow.autograd.module import Conv2d, Module, ModuleList, Parameter
from camoflow.autograd.tensor import Tensor, default_dtype
from camoflow.exceptions import ConfigurationError, DimensionError


@dataclass
class PyramidFeatures:
    """Encoder outputs: f1..f4 at strides 4/8/16/32 plus the (N, L) latent"""
    f1: Tensor
    f2: Tensor
    f3: Tensor
    f4: Tensor
    fx: Optional[Tensor]

    def levels(self):
        return (self.f1, self.f2, self.f3, self.f4)


class EncoderStage(Module):
    """conv 3x3 stride 2 -> act -> conv 3x3 -> act"""

    def __init__(self, in_channels: int, out_channels: int, activation: str, rng: np.random.Generator):
        super().__init__()
        self.activation = activation
        self.down = Conv2d(in_channels, out_channels, 3, stride=2, padding=1, rng=rng)
        self.conv = Conv2d(out_channels, out_channels, 3, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        x = F.activation(self.down(x), self.activation)
        return F.activation(self.conv(x), self.activation)


class PyramidEncoder(Module):
    """
    Stub backbone producing PyramidFeatures

    Args:
        widths: Channel widths C1..C4
        latent_dim: Length L of the global latent; None builds no latent head
        activation: Nonlinearity used throughout (gelu by default)
        rng: Generator for weight init
    """

    STRIDE = 32

    def __init__(
        self,
        widths: Sequence[int] = (32, 64, 128, 256),
        latent_dim: Optional[int] = 256,
        activation: str = 'gelu',
        rng: Optional[np.random.Generator] = None,
        in_channels: int = 3,
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_channels = in_channels
        self.activation = activation
        self.stem = Conv2d(in_channels, widths[0], 3, stride=2, padding=1, rng=rng)
        stages = []
        previous = widths[0]
        for width in widths:
            stages.append(EncoderStage(previous, width, activation, rng))
            previous = width
        self.stages = ModuleList(stages)
        self.has_latent = latent_dim is not None
        if self.has_latent:
            bound = 1.0 / np.sqrt(widths[-1])
            self.latent_weight = Parameter(
                rng.uniform(-bound, bound, size=(latent_dim, widths[-1])).astype(default_dtype())
            )
            self.latent_bias = Parameter(np.zeros(latent_dim, dtype=default_dtype()))

    def forward(self, image: Tensor) -> PyramidFeatures:
        """
        Encode a batch of images

        Raises:
            DimensionError: If the image is not (N, 3, H, W)
            ConfigurationError: If H or W is not divisible by 32 (checked before any compute)
        """
        if image.ndim != 4 or image.shape[1] != self.in_channels:
            raise DimensionError(
                f"encode: expected (N, {self.in_channels}, H, W) image, got {image.shape}"
            )
        h, w = image.shape[2:]
        if h % self.STRIDE or w % self.STRIDE:
            raise ConfigurationError(
                f"encode: image size {h}x{w} must be divisible by {self.STRIDE}"
            )

        x = F.activation(self.stem(image), self.activation)
        levels = []
        for stage in self.stages:
            x = stage(x)
            levels.append(x)
        fx = None
        if self.has_latent:
            fx = F.global_pool_project(levels[-1], self.latent_weight, self.latent_bias)
        return PyramidFeatures(*levels, fx=fx)
