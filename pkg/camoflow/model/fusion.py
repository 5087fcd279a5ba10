"""
Multi-scale feature integration

Two-stage fusion of the stride 8/16/32 pyramid levels:
- Stage 1 multiplies each level with resized neighbours
    f4' = f4 * down(f3)
    f3' = f3 * down(f2) * up(f4')
    f2' = f2 * up(f3')
- Stage 2 concatenates and projects back to the level width
    f4'' = conv3x3([f4', down(f3')])
    f3'' = conv3x3([f3', down(f2'), up(f4'')])
    f2'' = conv3x3([f2', up(f3'')])
- The skip stack joins fused and raw levels top-down
    z4 = conv1x1([f4'', f4])
    z3 = conv1x1([f3'', f3, up(z4)])
    z2 = conv1x1([f2'', f2, up(z3)])
    z1 = f1

When two multiplied levels have different widths, the resized operand is
aligned with a learned 1x1 conv. f1 is never fused.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from camoflow.autograd import functional as F
from camoflow.autograd.module import Conv2d, Module
from camoflow.autograd.tensor import Tensor
from camoflow.exceptions import DimensionError
from camoflow.model.encoder import PyramidFeatures


@dataclass
class FusedFeatures:
    """Stage-1 products (f*p) and stage-2 projections (f*pp)"""
    f2p: Tensor
    f3p: Tensor
    f4p: Tensor
    f2pp: Tensor
    f3pp: Tensor
    f4pp: Tensor


@dataclass
class SkipStack:
    """z1..z4 at strides 4/8/16/32, with the pre-projection concats kept"""
    z1: Tensor
    z2: Tensor
    z3: Tensor
    z4: Tensor
    z2_concat: Tensor
    z3_concat: Tensor
    z4_concat: Tensor

    def levels(self) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
        return (self.z1, self.z2, self.z3, self.z4)


def check_level_pair(fine: Tensor, coarse: Tensor, pair: str) -> None:
    """Raise DimensionError unless `coarse` is exactly half of `fine` per axis"""
    if fine.ndim != 4 or coarse.ndim != 4:
        raise DimensionError(f"{pair}: expected rank-4 tensors, got {fine.shape} and {coarse.shape}")
    if fine.shape[0] != coarse.shape[0]:
        raise DimensionError(f"{pair}: batch sizes differ ({fine.shape[0]} vs {coarse.shape[0]})")
    fh, fw = fine.shape[2:]
    ch, cw = coarse.shape[2:]
    if (fh, fw) != (2 * ch, 2 * cw):
        raise DimensionError(
            f"{pair}: spatial sizes {fh}x{fw} and {ch}x{cw} are not in a 2:1 ratio"
        )


def _aligner(in_channels: int, out_channels: int, rng: np.random.Generator) -> Optional[Conv2d]:
    if in_channels == out_channels:
        return None
    return Conv2d(in_channels, out_channels, 1, rng=rng)


def _align(conv: Optional[Conv2d], x: Tensor) -> Tensor:
    return x if conv is None else conv(x)


class SkipStackBuilder(Module):
    """1x1 projections of the top-down skip concatenations"""

    def __init__(self, widths: Sequence[int], rng: np.random.Generator):
        super().__init__()
        _, c2, c3, c4 = widths
        self.proj4 = Conv2d(c4 + c4, c4, 1, rng=rng)
        self.proj3 = Conv2d(c3 + c3 + c4, c3, 1, rng=rng)
        self.proj2 = Conv2d(c2 + c2 + c3, c2, 1, rng=rng)

    def forward(self, pyramid: PyramidFeatures, fused: FusedFeatures) -> SkipStack:
        for name, raw, merged in (
            ('f2', pyramid.f2, fused.f2pp),
            ('f3', pyramid.f3, fused.f3pp),
            ('f4', pyramid.f4, fused.f4pp),
        ):
            if raw.shape[0] != merged.shape[0] or raw.shape[2:] != merged.shape[2:]:
                raise DimensionError(
                    f"skip_stack: {name} has shape {raw.shape} but its fused level has {merged.shape}"
                )
        check_level_pair(pyramid.f1, pyramid.f2, 'f1/f2')

        z4_concat = F.concat_channels([fused.f4pp, pyramid.f4])
        z4 = self.proj4(z4_concat)
        z3_concat = F.concat_channels([fused.f3pp, pyramid.f3, F.resize2(z4, 'up')])
        z3 = self.proj3(z3_concat)
        z2_concat = F.concat_channels([fused.f2pp, pyramid.f2, F.resize2(z3, 'up')])
        z2 = self.proj2(z2_concat)
        return SkipStack(
            z1=pyramid.f1, z2=z2, z3=z3, z4=z4,
            z2_concat=z2_concat, z3_concat=z3_concat, z4_concat=z4_concat,
        )


class MSFI(Module):
    """
    Multiplicative-then-concatenative fusion plus the skip stack

    Example:
        >>> fusion = MSFI((32, 64, 128, 256), 'gelu', rng)
        >>> fused, skips = fusion(pyramid)
    """

    def __init__(self, widths: Sequence[int], activation: str = 'gelu', rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        _, c2, c3, c4 = widths
        self.activation = activation
        self.align_f3_to_f4 = _aligner(c3, c4, rng)
        self.align_f2_to_f3 = _aligner(c2, c3, rng)
        self.align_f4p_to_f3 = _aligner(c4, c3, rng)
        self.align_f3p_to_f2 = _aligner(c3, c2, rng)
        self.fuse4 = Conv2d(c4 + c3, c4, 3, rng=rng)
        self.fuse3 = Conv2d(c3 + c2 + c4, c3, 3, rng=rng)
        self.fuse2 = Conv2d(c2 + c3, c2, 3, rng=rng)
        self.skips = SkipStackBuilder(widths, rng)

    def fuse(self, f2: Tensor, f3: Tensor, f4: Tensor) -> FusedFeatures:
        """
        Two-stage fusion of f2, f3, f4

        Raises:
            DimensionError: Naming the level pair whose 2:1 size ratio is broken
        """
        check_level_pair(f2, f3, 'f2/f3')
        check_level_pair(f3, f4, 'f3/f4')

        # Stage 1
        f4p = F.eltwise(f4, _align(self.align_f3_to_f4, F.resize2(f3, 'down')), 'mul')
        f3p = F.eltwise(f3, _align(self.align_f2_to_f3, F.resize2(f2, 'down')), 'mul')
        f3p = F.eltwise(f3p, _align(self.align_f4p_to_f3, F.resize2(f4p, 'up')), 'mul')
        f2p = F.eltwise(f2, _align(self.align_f3p_to_f2, F.resize2(f3p, 'up')), 'mul')

        # Stage 2
        act = self.activation
        f4pp = F.activation(self.fuse4(F.concat_channels([f4p, F.resize2(f3p, 'down')])), act)
        f3pp = F.activation(
            self.fuse3(F.concat_channels([f3p, F.resize2(f2p, 'down'), F.resize2(f4pp, 'up')])), act
        )
        f2pp = F.activation(self.fuse2(F.concat_channels([f2p, F.resize2(f3pp, 'up')])), act)
        return FusedFeatures(f2p=f2p, f3p=f3p, f4p=f4p, f2pp=f2pp, f3pp=f3pp, f4pp=f4pp)

    def skip_stack(self, pyramid: PyramidFeatures, fused: FusedFeatures) -> SkipStack:
        return self.skips(pyramid, fused)

    def forward(self, pyramid: PyramidFeatures) -> Tuple[FusedFeatures, SkipStack]:
        fused = self.fuse(pyramid.f2, pyramid.f3, pyramid.f4)
        return fused, self.skip_stack(pyramid, fused)


class PlainFusion(Module):
    """
    Ablation substitute for MSFI

    Per-level 1x1 convs replace the multiplicative stage; the concatenative
    stage becomes resize-concat followed by a 1x1 projection. The skip stack
    is unchanged.
    """

    def __init__(self, widths: Sequence[int], activation: str = 'gelu', rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        _, c2, c3, c4 = widths
        self.activation = activation
        self.lateral2 = Conv2d(c2, c2, 1, rng=rng)
        self.lateral3 = Conv2d(c3, c3, 1, rng=rng)
        self.lateral4 = Conv2d(c4, c4, 1, rng=rng)
        self.merge4 = Conv2d(c4 + c3, c4, 1, rng=rng)
        self.merge3 = Conv2d(c3 + c2 + c4, c3, 1, rng=rng)
        self.merge2 = Conv2d(c2 + c3, c2, 1, rng=rng)
        self.skips = SkipStackBuilder(widths, rng)

    def fuse(self, f2: Tensor, f3: Tensor, f4: Tensor) -> FusedFeatures:
        check_level_pair(f2, f3, 'f2/f3')
        check_level_pair(f3, f4, 'f3/f4')
        f2p, f3p, f4p = self.lateral2(f2), self.lateral3(f3), self.lateral4(f4)
        act = self.activation
        f4pp = F.activation(self.merge4(F.concat_channels([f4p, F.resize2(f3p, 'down')])), act)
        f3pp = F.activation(
            self.merge3(F.concat_channels([f3p, F.resize2(f2p, 'down'), F.resize2(f4p, 'up')])), act
        )
        f2pp = F.activation(self.merge2(F.concat_channels([f2p, F.resize2(f3p, 'up')])), act)
        return FusedFeatures(f2p=f2p, f3p=f3p, f4p=f4p, f2pp=f2pp, f3pp=f3pp, f4pp=f4pp)

    def skip_stack(self, pyramid: PyramidFeatures, fused: FusedFeatures) -> SkipStack:
        return self.skips(pyramid, fused)

    def forward(self, pyramid: PyramidFeatures) -> Tuple[FusedFeatures, SkipStack]:
        fused = self.fuse(pyramid.f2, pyramid.f3, pyramid.f4)
        return fused, self.skip_stack(pyramid, fused)
