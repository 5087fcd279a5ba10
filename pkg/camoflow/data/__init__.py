"""
CamoFlow data I/O

- pnm: binary PPM/PGM reading and writing
- dataset: samples, manifests, batch loading
- synthetic: deterministic synthetic camouflage corpus
"""

from camoflow.data.dataset import (
    Batch,
    BatchLoader,
    Manifest,
    ManifestEntry,
    Sample,
    load_image,
    load_sample,
    read_manifest,
    write_manifest,
)
from camoflow.data.pnm import load_mask, load_rgb, read_pnm, save_mask, write_pnm
from camoflow.data.synthetic import gen_synthetic

__all__ = [
    'Batch',
    'BatchLoader',
    'Manifest',
    'ManifestEntry',
    'Sample',
    'load_image',
    'load_sample',
    'read_manifest',
    'write_manifest',
    'load_mask',
    'load_rgb',
    'read_pnm',
    'save_mask',
    'write_pnm',
    'gen_synthetic',
]
