"""Tests for multi-scale feature integration and the skip stack"""

import numpy as np
import pytest

from camoflow.autograd.tensor import Tensor, precision
from camoflow.exceptions import DimensionError
from camoflow.model.encoder import PyramidFeatures
from camoflow.model.fusion import MSFI, PlainFusion
from tests import oracles


def levels(rng, widths=(4, 4, 4, 4), size=16):
    shapes = [(1, c, size // 2 ** i, size // 2 ** i) for i, c in enumerate(widths)]
    return [Tensor(rng.uniform(-1, 1, size=shape)) for shape in shapes]


class TestMsfiFuse:
    """Tests for MSFI.fuse"""

    def test_ones_stay_ones(self, rng):
        """Products of all-ones operands are all ones"""
        with precision(np.float64):
            fusion = MSFI((4, 4, 4, 4), rng=rng).astype(np.float64)
            ones = [Tensor(np.ones((1, 4, s, s))) for s in (8, 4, 2)]
            fused = fusion.fuse(*ones)
        for name in ('f2p', 'f3p', 'f4p'):
            np.testing.assert_allclose(getattr(fused, name).data, 1.0)

    def test_zero_operand_annihilates(self, rng):
        """f3 = 0 zeroes every stage-1 product"""
        with precision(np.float64):
            fusion = MSFI((4, 4, 4, 4), rng=rng).astype(np.float64)
            f2 = Tensor(rng.uniform(-1, 1, size=(1, 4, 8, 8)))
            f4 = Tensor(rng.uniform(-1, 1, size=(1, 4, 2, 2)))
            fused = fusion.fuse(f2, Tensor(np.zeros((1, 4, 4, 4))), f4)
        for name in ('f2p', 'f3p', 'f4p'):
            np.testing.assert_array_equal(getattr(fused, name).data, 0.0)

    @pytest.mark.parametrize("widths", [(4, 4, 4, 4), (4, 4, 8, 12)])
    def test_matches_composition_oracle(self, rng, widths):
        with precision(np.float64):
            fusion = MSFI(widths, rng=rng).astype(np.float64)
            _, f2, f3, f4 = levels(rng, widths, size=16)
            fused = fusion.fuse(f2, f3, f4)
        expected = oracles.msfi_fuse(fusion, f2.data, f3.data, f4.data)
        for name, value in expected.items():
            np.testing.assert_allclose(getattr(fused, name).data, value, atol=1e-5, err_msg=name)

    def test_scaling_f2(self, rng):
        """f4' ignores f2, f3' is linear and f2' quadratic in a scale of f2"""
        with precision(np.float64):
            fusion = MSFI((4, 4, 4, 4), rng=rng).astype(np.float64)
            _, f2, f3, f4 = levels(rng, size=16)
            base = fusion.fuse(f2, f3, f4)
            scaled = fusion.fuse(f2 * 3.0, f3, f4)
        np.testing.assert_allclose(scaled.f4p.data, base.f4p.data)
        np.testing.assert_allclose(scaled.f3p.data, 3.0 * base.f3p.data, atol=1e-12)
        np.testing.assert_allclose(scaled.f2p.data, 9.0 * base.f2p.data, atol=1e-12)

    def test_broken_ratio_names_pair(self, rng):
        fusion = MSFI((4, 4, 4, 4), rng=rng)
        with pytest.raises(DimensionError, match="f3/f4"):
            fusion.fuse(Tensor(np.ones((1, 4, 8, 8))), Tensor(np.ones((1, 4, 4, 4))), Tensor(np.ones((1, 4, 4, 4))))
        with pytest.raises(DimensionError, match="f2/f3"):
            fusion.fuse(Tensor(np.ones((1, 4, 8, 8))), Tensor(np.ones((1, 4, 2, 2))), Tensor(np.ones((1, 4, 1, 1))))


class TestSkipStack:
    """Tests for the top-down skip stack"""

    def test_concat_blocks(self, rng):
        with precision(np.float64):
            fusion = MSFI((4, 4, 8, 12), rng=rng).astype(np.float64)
            f1, f2, f3, f4 = levels(rng, (4, 4, 8, 12), size=16)
            fused, skips = fusion(PyramidFeatures(f1, f2, f3, f4, fx=None))

        np.testing.assert_array_equal(skips.z4_concat.data[:, :12], fused.f4pp.data)
        np.testing.assert_array_equal(skips.z4_concat.data[:, 12:], f4.data)
        np.testing.assert_array_equal(skips.z3_concat.data[:, :8], fused.f3pp.data)
        np.testing.assert_array_equal(skips.z3_concat.data[:, 8:16], f3.data)
        np.testing.assert_allclose(skips.z3_concat.data[:, 16:], oracles.up(skips.z4.data), atol=1e-12)
        np.testing.assert_allclose(skips.z2_concat.data[:, 8:], oracles.up(skips.z3.data), atol=1e-12)
        np.testing.assert_allclose(skips.z4.data, oracles.conv_of(fusion.skips.proj4, skips.z4_concat.data), atol=1e-6)
        assert skips.z1 is f1

    def test_constant_raw_block_survives(self, rng):
        fusion = MSFI((4, 4, 4, 4), rng=rng)
        f1, f2, f3 = (Tensor(np.full((1, 4, s, s), 0.5, dtype=np.float32)) for s in (16, 8, 4))
        f4 = Tensor(np.full((1, 4, 2, 2), 2.0, dtype=np.float32))
        _, skips = fusion(PyramidFeatures(f1, f2, f3, f4, fx=None))
        np.testing.assert_array_equal(skips.z4_concat.data[:, 4:], 2.0)

    def test_level_sizes(self, rng):
        f1, f2, f3, f4 = levels(rng, (4, 4, 8, 12), size=16)
        _, skips = MSFI((4, 4, 8, 12), rng=rng)(PyramidFeatures(f1, f2, f3, f4, fx=None))
        assert [z.shape for z in skips.levels()] == [(1, 4, 16, 16), (1, 4, 8, 8), (1, 8, 4, 4), (1, 12, 2, 2)]


class TestPlainFusion:
    """Tests for the fusion substitute"""

    def test_same_interface(self, rng):
        f1, f2, f3, f4 = levels(rng, (4, 4, 8, 12), size=16)
        pyramid = PyramidFeatures(f1, f2, f3, f4, fx=None)
        plain_fused, plain_skips = PlainFusion((4, 4, 8, 12), rng=rng)(pyramid)
        msfi_fused, msfi_skips = MSFI((4, 4, 8, 12), rng=rng)(pyramid)
        for name in ('f2pp', 'f3pp', 'f4pp'):
            assert getattr(plain_fused, name).shape == getattr(msfi_fused, name).shape
        assert [z.shape for z in plain_skips.levels()] == [z.shape for z in msfi_skips.levels()]

    def test_not_multiplicative(self, rng):
        """A zero f3 does not zero the other levels"""
        plain = PlainFusion((4, 4, 4, 4), rng=rng)
        f2 = Tensor(rng.uniform(0.5, 1, size=(1, 4, 8, 8)))
        f4 = Tensor(rng.uniform(0.5, 1, size=(1, 4, 2, 2)))
        fused = plain.fuse(f2, Tensor(np.zeros((1, 4, 4, 4))), f4)
        assert np.any(fused.f4pp.data != 0)
        assert np.any(fused.f2pp.data != 0)
