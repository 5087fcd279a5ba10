"""Tests for the synthetic camouflage generator"""

import numpy as np
import pytest

from camoflow.data.dataset import read_manifest
from camoflow.data.pnm import load_mask, load_rgb, read_pnm
from camoflow.data.synthetic import MAX_AREA, MIN_AREA, gen_synthetic, generate_sample, value_noise
from camoflow.exceptions import ConfigurationError


def corpus_bytes(root):
    return {path.relative_to(root).as_posix(): path.read_bytes() for path in sorted(root.rglob('*')) if path.is_file()}


class TestGenerateSample:
    """Tests for generate_sample"""

    def test_area_bounds(self):
        for i in range(100):
            sample = generate_sample(np.random.default_rng([3, i]), 64)
            assert MIN_AREA <= sample.area <= MAX_AREA
            assert set(np.unique(sample.mask)) == {0, 1}

    def test_image_range(self, rng):
        sample = generate_sample(rng, 32, similarity=0.5)
        assert sample.image.shape == (32, 32, 3)
        assert sample.image.min() >= 0.0 and sample.image.max() <= 1.0

    def test_without_occluders(self):
        for i in range(10):
            sample = generate_sample(np.random.default_rng([4, i]), 32, occluder_prob=0.0)
            assert MIN_AREA <= sample.area <= MAX_AREA

    def test_value_noise_range(self, rng):
        noise = value_noise(rng, 32)
        assert noise.shape == (32, 32)
        assert noise.min() >= 0.0 and noise.max() <= 1.0
        assert noise.std() > 0.0


class TestGenSynthetic:
    """Tests for gen_synthetic"""

    def test_same_seed_same_bytes(self, temp_dir):
        gen_synthetic(temp_dir / 'a', seed=5, n=3, size=32)
        gen_synthetic(temp_dir / 'b', seed=5, n=3, size=32)
        first, second = corpus_bytes(temp_dir / 'a'), corpus_bytes(temp_dir / 'b')
        assert sorted(first) == ['images/train_0000.ppm', 'images/train_0001.ppm', 'images/train_0002.ppm',
                                 'masks/train_0000.pgm', 'masks/train_0001.pgm', 'masks/train_0002.pgm',
                                 'train.tsv']
        assert first == second

    def test_seed_and_split_change_output(self, temp_dir):
        gen_synthetic(temp_dir / 'a', seed=5, n=1, size=32)
        gen_synthetic(temp_dir / 'b', seed=6, n=1, size=32)
        gen_synthetic(temp_dir / 'a', seed=5, n=1, size=32, split='val')
        image = lambda root, name: (root / 'images' / name).read_bytes()
        assert image(temp_dir / 'a', 'train_0000.ppm') != image(temp_dir / 'b', 'train_0000.ppm')
        assert image(temp_dir / 'a', 'train_0000.ppm') != image(temp_dir / 'a', 'val_0000.ppm')

    def test_prefix_is_stable(self, temp_dir):
        """Sample i does not depend on how many samples follow it"""
        gen_synthetic(temp_dir / 'a', seed=5, n=1, size=32)
        gen_synthetic(temp_dir / 'b', seed=5, n=3, size=32)
        name = 'images/train_0000.ppm'
        assert corpus_bytes(temp_dir / 'a')[name] == corpus_bytes(temp_dir / 'b')[name]

    def test_written_masks_are_binary(self, corpus):
        for entry in corpus['train']:
            pixels = read_pnm(entry.mask).pixels
            assert set(np.unique(pixels)) <= {0, 255}
            assert pixels.any()

    def test_manifest_matches_files(self, corpus):
        manifest = read_manifest(corpus['root'] / 'val.tsv')
        assert manifest.ids() == corpus['val'].ids()
        assert all(entry.image.is_file() and entry.mask.is_file() for entry in manifest)

    def test_distinct_textures_are_separable(self, temp_dir):
        """A grey-level midpoint threshold recovers the mask when similarity is large"""
        manifest = gen_synthetic(temp_dir, seed=1, n=10, size=64, similarity=0.5)
        errors = []
        for entry in manifest:
            grey = load_rgb(entry.image).mean(axis=0)
            pred = (grey > (grey.min() + grey.max()) / 2).astype(np.float32)
            errors.append(np.abs(pred - load_mask(entry.mask)).mean())
        assert np.mean(errors) < 0.1

    @pytest.mark.parametrize(
        "kwargs,message",
        [
            ({'n': 0}, "n must be >= 1"),
            ({'size': 48}, "size must be divisible by 32"),
            ({'split': 'dev'}, "split"),
            ({'occluder_prob': 1.5}, "occluder_prob"),
            ({'similarity': -0.1}, "similarity"),
        ],
    )
    def test_invalid_arguments(self, temp_dir, kwargs, message):
        args = {'seed': 0, 'n': 1, 'size': 32, **kwargs}
        with pytest.raises(ConfigurationError, match=message):
            gen_synthetic(temp_dir, **args)
