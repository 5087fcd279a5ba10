"""
Synthetic camouflage corpus

Each sample is a textured background with one smooth blob filled by the
same texture family at a brightness shifted by `similarity`:
- Texture: 3-octave lattice value noise per colour channel
- Blob: radially perturbed, rotated ellipse
- Occluders: background-textured stripes that also cut the mask
Mask area is kept within [0.05, 0.5] of the image by rejection sampling.
Output is fully determined by (seed, split, index).
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.ndimage import map_coordinates

from camoflow.data.dataset import SPLITS, Manifest, ManifestEntry, write_manifest
from camoflow.data.pnm import quantize, write_pnm
from camoflow.exceptions import ConfigurationError, DataIOError
from camoflow.logging_config import get_logger
from camoflow.validators import InputValidator

logger = get_logger('camoflow.synthetic')

PathLike = Union[str, Path]

MIN_AREA = 0.05
MAX_AREA = 0.5
MAX_ATTEMPTS = 200
OCTAVES = 3
NOISE_AMPLITUDE = 0.1


@dataclass
class SyntheticSample:
    image: np.ndarray  # (H, W, 3) float in [0, 1]
    mask: np.ndarray   # (H, W) uint8 in {0, 1}

    @property
    def area(self) -> float:
        return float(self.mask.mean())


def value_noise(rng: np.random.Generator, size: int, base_cells: int = 4, octaves: int = OCTAVES) -> np.ndarray:
    """
    Sum of octaves of cubic-interpolated lattice noise, scaled to about [0, 1]

    Octave o uses a (base_cells * 2**o + 1)^2 lattice and amplitude 0.5**o.
    """
    total = np.zeros((size, size))
    norm = 0.0
    for octave in range(octaves):
        cells = base_cells * 2 ** octave
        lattice = rng.random((cells + 1, cells + 1))
        coords = np.linspace(0.0, cells, size)
        yy, xx = np.meshgrid(coords, coords, indexing='ij')
        amplitude = 0.5 ** octave
        total += amplitude * map_coordinates(lattice, [yy, xx], order=3, mode='nearest')
        norm += amplitude
    return np.clip(total / norm, 0.0, 1.0)


def texture(rng: np.random.Generator, size: int, base: np.ndarray, base_cells: int) -> np.ndarray:
    """(H, W, 3) texture: base colour plus +-NOISE_AMPLITUDE of noise per channel"""
    channels = [
        base[c] + NOISE_AMPLITUDE * (2.0 * value_noise(rng, size, base_cells) - 1.0)
        for c in range(3)
    ]
    return np.clip(np.stack(channels, axis=-1), 0.0, 1.0)


def blob_mask(rng: np.random.Generator, size: int) -> np.ndarray:
    """Radially perturbed ellipse: rho(u, v) <= 1 + sum_k a_k cos(k*phi + p_k)"""
    cy, cx = rng.uniform(0.3, 0.7, size=2) * size
    ry, rx = rng.uniform(0.15, 0.35, size=2) * size
    theta = rng.uniform(0.0, np.pi)
    harmonics = np.arange(2, 5)
    amplitudes = rng.uniform(0.0, 0.1, size=harmonics.size)
    phases = rng.uniform(0.0, 2 * np.pi, size=harmonics.size)

    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    dy, dx = ys - cy, xs - cx
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    rho = np.sqrt((u / rx) ** 2 + (v / ry) ** 2)
    phi = np.arctan2(v / ry, u / rx)
    radius = 1.0 + np.sum(
        amplitudes[:, None, None] * np.cos(harmonics[:, None, None] * phi + phases[:, None, None]),
        axis=0,
    )
    return (rho <= radius).astype(np.uint8)


def occluder_mask(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    """`count` straight stripes of width 4-8% of the image through its central region"""
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    covered = np.zeros((size, size), dtype=bool)
    for _ in range(count):
        py, px = rng.uniform(0.3, 0.7, size=2) * size
        angle = rng.uniform(0.0, np.pi)
        half_width = 0.5 * rng.uniform(0.04, 0.08) * size
        distance = np.abs((xs - px) * np.sin(angle) - (ys - py) * np.cos(angle))
        covered |= distance <= half_width
    return covered


def generate_sample(
    rng: np.random.Generator,
    size: int,
    similarity: float = 0.1,
    occluder_prob: float = 0.3,
) -> SyntheticSample:
    """
    Draw one camouflage sample

    Raises:
        ConfigurationError: If no blob within the area bounds is found
    """
    background_level = rng.uniform(0.15, 0.3)
    tint = rng.uniform(-0.05, 0.05, size=3)
    bg = texture(rng, size, background_level + tint, base_cells=4)
    fg = texture(rng, size, background_level + similarity + tint, base_cells=6)

    for _ in range(MAX_ATTEMPTS):
        mask = blob_mask(rng, size)
        if rng.random() < occluder_prob:
            stripes = occluder_mask(rng, size, int(rng.integers(1, 3)))
            mask = np.where(stripes, 0, mask).astype(np.uint8)
        if MIN_AREA <= mask.mean() <= MAX_AREA:
            break
    else:
        raise ConfigurationError(
            f"gen_synthetic: no blob with area in [{MIN_AREA}, {MAX_AREA}] after {MAX_ATTEMPTS} draws"
        )
    image = np.where(mask[..., None].astype(bool), fg, bg)
    return SyntheticSample(image=image, mask=mask)


def gen_synthetic(
    out_dir: PathLike,
    seed: int,
    n: int,
    size: int,
    split: str = 'train',
    similarity: float = 0.1,
    occluder_prob: float = 0.3,
) -> Manifest:
    """
    Write a synthetic corpus and its manifest

    Files: <out>/images/<split>_0000.ppm, <out>/masks/<split>_0000.pgm and
    <out>/<split>.tsv.

    Args:
        out_dir: Corpus root
        seed: Base seed; sample i of a split uses default_rng([seed, split, i])
        n: Number of samples (>= 1)
        size: Square side, divisible by 32
        similarity: Foreground brightness shift (small = well camouflaged)
        occluder_prob: Chance of 1-2 occluding stripes per sample

    Returns:
        The written Manifest

    Raises:
        ConfigurationError: On invalid n, size or split
        DataIOError: If files cannot be written
    """
    InputValidator.validate_positive_int('n', n)
    InputValidator.validate_divisible('size', size, 32)
    InputValidator.validate_non_negative('similarity', similarity)
    InputValidator.validate_choice('split', split, SPLITS)
    if not 0 <= occluder_prob <= 1:
        raise ConfigurationError(f"occluder_prob must lie in [0, 1], got {occluder_prob}")

    out_dir = Path(out_dir)
    image_dir = out_dir / 'images'
    mask_dir = out_dir / 'masks'
    try:
        image_dir.mkdir(parents=True, exist_ok=True)
        mask_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataIOError(f"Cannot create corpus directories under {out_dir}: {e}")

    split_index = SPLITS.index(split)
    entries = []
    for i in range(n):
        rng = np.random.default_rng([seed, split_index, i])
        sample = generate_sample(rng, size, similarity, occluder_prob)
        sample_id = f"{split}_{i:04d}"
        image_path = image_dir / f"{sample_id}.ppm"
        mask_path = mask_dir / f"{sample_id}.pgm"
        write_pnm(image_path, quantize(sample.image))
        write_pnm(mask_path, sample.mask * np.uint8(255))
        entries.append(ManifestEntry(id=sample_id, image=image_path, mask=mask_path))

    manifest = Manifest(entries=entries, split=split)
    write_manifest(manifest, out_dir / f"{split}.tsv")
    logger.info(f"Generated {n} synthetic {split} samples ({size}x{size}, similarity={similarity}) in {out_dir}")
    return manifest
