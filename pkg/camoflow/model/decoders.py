"""
Mask decoders

- UNet: ((Conv)^2 -> MaxPool)^4, (Conv)^3 bottleneck,
  (UpConv -> Concat -> Conv)^4, 1x1 head; Conv = 3x3 + activation,
  UpConv = 2x bilinear + 3x3 conv
- CoarseDecoder: UNet over the (upsampled) f2'' features, then x4 to image size
- SpatialBroadcastDecoder: tile the global latent, append coordinate
  channels, conv1x1 -> act -> conv3x3 -> sigmoid
- FinalDecoder: resize m1..m4 to stride 4, append the pooled fine mask,
  conv1x1 fusion, UNet, then x4 to image size
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from camoflow.autograd import functional as F
from camoflow.autograd.module import Conv2d, Module, ModuleList
from camoflow.autograd.tensor import Tensor
from camoflow.exceptions import DimensionError

UNET_MULTIPLE = 16


@dataclass
class MaskTriple:
    """Coarse logits, fine residual mask in (0, 1) (None without SBD), final logits"""
    coarse: Tensor
    fine: Optional[Tensor]
    final: Tensor

    def supervised(self) -> List[Tensor]:
        return [mask for mask in (self.coarse, self.fine, self.final) if mask is not None]


@dataclass
class SbdLatent:
    """Latent, target size and the tiled (N, L+2, h, w) decoder input"""
    z: Tensor
    h: int
    w: int
    z_sb: Tensor


class ConvAct(Module):
    def __init__(self, in_channels: int, out_channels: int, activation: str, rng: np.random.Generator):
        super().__init__()
        self.activation = activation
        self.conv = Conv2d(in_channels, out_channels, 3, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        return F.activation(self.conv(x), self.activation)


class UpConv(Module):
    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator):
        super().__init__()
        self.conv = Conv2d(in_channels, out_channels, 3, rng=rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv(F.resize2(x, 'up'))


class UNet(Module):
    """
    Mini U-Net with four pooling levels

    Args:
        in_channels: Input width
        width: Channels at the first level (doubled per level)
        out_channels: Head width
        activation: Nonlinearity for every Conv
        rng: Generator for weight init
    """

    LEVELS = 4

    def __init__(
        self,
        in_channels: int,
        width: int = 16,
        out_channels: int = 1,
        activation: str = 'gelu',
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        widths = [width * 2 ** level for level in range(self.LEVELS)]
        down = []
        previous = in_channels
        for w in widths:
            down.append(ModuleList([ConvAct(previous, w, activation, rng), ConvAct(w, w, activation, rng)]))
            previous = w
        self.down = ModuleList(down)
        self.bottleneck = ModuleList([ConvAct(previous, previous, activation, rng) for _ in range(3)])
        ups, merges = [], []
        for w in reversed(widths):
            ups.append(UpConv(previous, w, rng))
            merges.append(ConvAct(2 * w, w, activation, rng))
            previous = w
        self.ups = ModuleList(ups)
        self.merges = ModuleList(merges)
        self.head = Conv2d(previous, out_channels, 1, rng=rng)

    def forward(self, x: Tensor, trace: Optional[List[Tuple[str, Tuple[int, ...]]]] = None) -> Tensor:
        """
        Decode x to out_channels logits at the same spatial size

        Args:
            x: (N, C, H, W) with H, W divisible by 16
            trace: Optional list receiving (stage, shape) records

        Raises:
            DimensionError: If H or W is not divisible by 16
        """
        if x.ndim != 4 or x.shape[2] % UNET_MULTIPLE or x.shape[3] % UNET_MULTIPLE:
            raise DimensionError(
                f"unet_forward: spatial size {x.shape[2:]} must be divisible by {UNET_MULTIPLE}"
            )

        def record(stage: str, t: Tensor) -> None:
            if trace is not None:
                trace.append((stage, t.shape))

        record('input', x)
        skips = []
        for level, convs in enumerate(self.down):
            for conv in convs:
                x = conv(x)
            skips.append(x)
            x = F.maxpool2(x)
            record(f'down{level}', x)
        for conv in self.bottleneck:
            x = conv(x)
        record('bottleneck', x)
        for level, (up, merge) in enumerate(zip(self.ups, self.merges)):
            x = up(x)
            x = F.concat_channels([x, skips[-1 - level]])
            record(f'concat{level}', x)
            x = merge(x)
            record(f'up{level}', x)
        return self.head(x)


def _unet_any_size(unet: UNet, x: Tensor) -> Tensor:
    """Zero-pad to a multiple of 16, decode, crop back"""
    h, w = x.shape[2:]
    return F.crop2d(unet(F.pad_to_multiple(x, UNET_MULTIPLE)), h, w)


class CoarseDecoder(Module):
    """UNet decode of f2'' (upsampled x2 to stride 4) into coarse logits"""

    def __init__(self, in_channels: int, width: int = 16, activation: str = 'gelu', rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.unet = UNet(in_channels, width, 1, activation, rng)

    def forward(self, f2pp: Tensor, image_size: Tuple[int, int]) -> Tensor:
        """
        Args:
            f2pp: Fused stride-8 features
            image_size: (H, W) of the input image

        Returns:
            Coarse logits of shape (N, 1, H, W)
        """
        upsampled = F.resize2(f2pp, 'up')
        expected = (image_size[0] // 4, image_size[1] // 4)
        if upsampled.shape[2:] != expected:
            raise DimensionError(
                f"coarse_decode: f2'' at stride 4 is {upsampled.shape[2:]}, expected {expected}"
            )
        return F.resize(_unet_any_size(self.unet, upsampled), image_size)


class SpatialBroadcastDecoder(Module):
    """
    Fine-mask decoder over the global latent

    Args:
        latent_dim: L
        hidden: Width of the per-pixel 1x1 conv
        activation: Nonlinearity between the two convs
    """

    def __init__(self, latent_dim: int, hidden: int = 64, activation: str = 'gelu', rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.activation = activation
        self.pixel = Conv2d(latent_dim + 2, hidden, 1, rng=rng)
        self.fuse = Conv2d(hidden, 1, 3, rng=rng)

    def broadcast(self, fx: Tensor, h: int, w: int) -> SbdLatent:
        """Tile fx over (h, w) and append coordinate channels"""
        if fx.ndim != 2:
            raise DimensionError(f"sbd_decode: latent must be (N, L), got {fx.shape}")
        grid = F.coord_grid(h, w, dtype=fx.dtype)
        coords = Tensor(np.repeat(grid.data, fx.shape[0], axis=0))
        z_sb = F.concat_channels([F.broadcast_latent(fx, h, w), coords])
        return SbdLatent(z=fx, h=h, w=w, z_sb=z_sb)

    def forward(self, fx: Tensor, h: int, w: int) -> Tensor:
        return self.decode(fx, h, w)[0]

    def decode(self, fx: Tensor, h: int, w: int) -> Tuple[Tensor, SbdLatent]:
        latent = self.broadcast(fx, h, w)
        hidden = F.activation(self.pixel(latent.z_sb), self.activation)
        return F.sigmoid(self.fuse(hidden)), latent


class FinalDecoder(Module):
    """
    UNet decode of the MSKM outputs joined with the fine mask

    Args:
        widths: C1..C4 of m1..m4
        use_fine: Whether a fine-mask channel is concatenated
        fused_width: Channels after the 1x1 fusion conv
        width: UNet base width
    """

    def __init__(
        self,
        widths: Sequence[int],
        use_fine: bool = True,
        fused_width: int = 16,
        width: int = 16,
        activation: str = 'gelu',
        rng: Optional[np.random.Generator] = None,
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.use_fine = use_fine
        self.fusion = Conv2d(sum(widths) + (1 if use_fine else 0), fused_width, 1, rng=rng)
        self.unet = UNet(fused_width, width, 1, activation, rng)

    def forward(
        self,
        levels: Sequence[Tensor],
        fine: Optional[Tensor],
        image_size: Tuple[int, int],
        trace: Optional[Dict[str, Tensor]] = None,
    ) -> Tensor:
        """
        Args:
            levels: m1..m4 at strides 4/8/16/32
            fine: Fine mask (N, 1, H, W) or None when the SBD path is off
            image_size: (H, W) of the input image
            trace: Optional dict receiving the pre-fusion concat under 'concat'

        Returns:
            Final logits (N, 1, H, W)

        Raises:
            DimensionError: Naming the operand whose size does not fit
        """
        m1 = levels[0]
        target = m1.shape[2:]
        expected = (image_size[0] // 4, image_size[1] // 4)
        if target != expected:
            raise DimensionError(f"final_decode: m1 is {target}, expected stride-4 size {expected}")
        parts = [m1]
        for index, m in enumerate(levels[1:], start=2):
            stride = 2 ** (index + 1)
            if m.shape[2:] != (image_size[0] // stride, image_size[1] // stride):
                raise DimensionError(
                    f"final_decode: m{index} is {m.shape[2:]}, expected stride-{stride} size"
                )
            parts.append(F.resize(m, target))
        if self.use_fine:
            if fine is None:
                raise DimensionError("final_decode: fine mask required but not given")
            if fine.shape[1] != 1 or fine.shape[2:] != tuple(image_size):
                raise DimensionError(
                    f"final_decode: fine mask is {fine.shape}, expected (N, 1, {image_size[0]}, {image_size[1]})"
                )
            parts.append(F.mean_pool(fine, 4))
        concat = F.concat_channels(parts)
        if trace is not None:
            trace['concat'] = concat
        fused = self.fusion(concat)
        return F.resize(_unet_any_size(self.unet, fused), image_size)


class AuxHeads(Module):
    """1x1 logit heads on f3'' and f4'' (supervised at strides 16 and 32)"""

    def __init__(self, c3: int, c4: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.head3 = Conv2d(c3, 1, 1, rng=rng)
        self.head4 = Conv2d(c4, 1, 1, rng=rng)

    def forward(self, f3pp: Tensor, f4pp: Tensor) -> List[Tuple[Tensor, int]]:
        return [(self.head3(f3pp), 16), (self.head4(f4pp), 32)]
