"""Tests for the U-Net, coarse, spatial broadcast and final decoders"""

import numpy as np
import pytest

from camoflow.autograd.tensor import Tensor
from camoflow.exceptions import DimensionError
from camoflow.model.decoders import (
    AuxHeads,
    CoarseDecoder,
    FinalDecoder,
    SpatialBroadcastDecoder,
    UNet,
)


def features(rng, channels, size, batch=1):
    return Tensor(rng.uniform(-1, 1, size=(batch, channels, size, size)).astype(np.float32))


class TestUNet:
    """Tests for UNet"""

    def test_internal_sizes(self, rng):
        trace = []
        out = UNet(3, width=4, rng=rng)(features(rng, 3, 16), trace=trace)
        sizes = [shape[2] for stage, shape in trace if stage != 'input' and not stage.startswith('concat')]
        assert sizes == [8, 4, 2, 1, 1, 2, 4, 8, 16]
        assert out.shape == (1, 1, 16, 16)

    def test_skip_concat_widths(self, rng):
        trace = []
        UNet(3, width=4, rng=rng)(features(rng, 3, 16), trace=trace)
        concats = [shape[1] for stage, shape in trace if stage.startswith('concat')]
        assert concats == [64, 32, 16, 8]

    def test_head_width(self, rng):
        out = UNet(2, width=4, out_channels=3, rng=rng)(features(rng, 2, 32, batch=2))
        assert out.shape == (2, 3, 32, 32)

    def test_indivisible_size(self, rng):
        with pytest.raises(DimensionError, match="divisible by 16"):
            UNet(2, width=4, rng=rng)(features(rng, 2, 24))


class TestCoarseDecoder:
    """Tests for CoarseDecoder"""

    def test_image_resolution_logits(self, rng):
        decoder = CoarseDecoder(16, width=4, rng=rng)
        assert decoder(features(rng, 16, 8), (64, 64)).shape == (1, 1, 64, 64)

    def test_non_multiple_of_16_stride4_map(self, rng):
        """96x96 input puts f2'' at 24x24 upsampled to 48; padding handles the U-Net"""
        decoder = CoarseDecoder(8, width=4, rng=rng)
        assert decoder(features(rng, 8, 12), (96, 96)).shape == (1, 1, 96, 96)

    def test_size_mismatch(self, rng):
        with pytest.raises(DimensionError, match="coarse_decode"):
            CoarseDecoder(8, width=4, rng=rng)(features(rng, 8, 8), (128, 128))


class TestSpatialBroadcastDecoder:
    """Tests for SpatialBroadcastDecoder"""

    def test_constant_path_gives_half(self, rng):
        sbd = SpatialBroadcastDecoder(6, hidden=8, rng=rng)
        sbd.pixel.weight.data[:] = 0.0
        sbd.pixel.bias.data[:] = 0.3
        sbd.fuse.weight.data[:] = 0.0
        sbd.fuse.bias.data[:] = 0.0
        fine, latent = sbd.decode(Tensor(rng.uniform(size=(2, 6)).astype(np.float32)), 8, 12)
        np.testing.assert_allclose(fine.data, 0.5)
        assert fine.shape == (2, 1, 8, 12)
        assert latent.z_sb.shape == (2, 8, 8, 12)

    def test_tiled_latent_and_coordinates(self, rng):
        fx = Tensor(rng.uniform(size=(1, 3)).astype(np.float32))
        latent = SpatialBroadcastDecoder(3, hidden=4, rng=rng).broadcast(fx, 4, 5)
        for channel in range(3):
            np.testing.assert_array_equal(latent.z_sb.data[0, channel], fx.data[0, channel])
        np.testing.assert_allclose(latent.z_sb.data[0, 3, 0], np.linspace(-1, 1, 5), atol=1e-6)
        np.testing.assert_allclose(latent.z_sb.data[0, 4, :, 0], np.linspace(-1, 1, 4), atol=1e-6)

    def test_output_in_unit_interval(self, rng):
        fine = SpatialBroadcastDecoder(4, hidden=8, rng=rng)(Tensor(rng.normal(size=(1, 4)).astype(np.float32)), 16, 16)
        assert np.all((fine.data > 0) & (fine.data < 1))

    def test_latent_must_be_matrix(self, rng):
        with pytest.raises(DimensionError):
            SpatialBroadcastDecoder(4, hidden=8, rng=rng)(Tensor(np.zeros((1, 4, 1, 1))), 4, 4)


class TestFinalDecoder:
    """Tests for FinalDecoder"""

    widths = (4, 8, 8, 16)

    def levels(self, rng, size=64, batch=1):
        return [features(rng, c, size // 2 ** (i + 2), batch) for i, c in enumerate(self.widths)]

    def test_with_fine_mask(self, rng):
        decoder = FinalDecoder(self.widths, use_fine=True, fused_width=4, width=4, rng=rng)
        fine = Tensor(rng.uniform(size=(1, 1, 64, 64)).astype(np.float32))
        trace = {}
        out = decoder(self.levels(rng), fine, (64, 64), trace=trace)
        assert out.shape == (1, 1, 64, 64)
        assert trace['concat'].shape == (1, sum(self.widths) + 1, 16, 16)

    def test_fine_channel_is_pooled_mask(self, rng):
        decoder = FinalDecoder(self.widths, use_fine=True, fused_width=4, width=4, rng=rng)
        fine = rng.uniform(size=(1, 1, 64, 64)).astype(np.float32)
        trace = {}
        decoder(self.levels(rng), Tensor(fine), (64, 64), trace=trace)
        pooled = fine.reshape(1, 1, 16, 4, 16, 4).mean(axis=(3, 5))
        np.testing.assert_allclose(trace['concat'].data[:, -1:], pooled, atol=1e-6)

    def test_without_fine_mask(self, rng):
        decoder = FinalDecoder(self.widths, use_fine=False, fused_width=4, width=4, rng=rng)
        trace = {}
        decoder(self.levels(rng), None, (64, 64), trace=trace)
        assert trace['concat'].shape[1] == sum(self.widths)

    def test_missing_fine_mask(self, rng):
        decoder = FinalDecoder(self.widths, use_fine=True, fused_width=4, width=4, rng=rng)
        with pytest.raises(DimensionError, match="fine mask"):
            decoder(self.levels(rng), None, (64, 64))

    def test_operand_size_is_named(self, rng):
        decoder = FinalDecoder(self.widths, use_fine=False, fused_width=4, width=4, rng=rng)
        levels = self.levels(rng)
        levels[2] = features(rng, 8, 3)
        with pytest.raises(DimensionError, match="m3"):
            decoder(levels, None, (64, 64))


class TestAuxHeads:
    def test_strides(self, rng):
        heads = AuxHeads(8, 16, rng=rng)(features(rng, 8, 4), features(rng, 16, 2))
        assert [(logits.shape, stride) for logits, stride in heads] == [((1, 1, 4, 4), 16), ((1, 1, 2, 2), 32)]
