"""
Samples, manifests and batch loading

- Manifest files are UTF-8 TSV, one "id<TAB>image<TAB>mask" line per
  sample, paths relative to the manifest's directory
- load_sample resizes images bilinearly and masks by nearest neighbour
- BatchLoader stacks samples into batches on a producer thread that hands
  complete batches over a bounded queue
"""

import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from camoflow.autograd import functional as F
from camoflow.autograd.tensor import Tensor
from camoflow.exceptions import ConfigurationError, DataIOError, DimensionError, FormatError
from camoflow.logging_config import get_logger
from camoflow.data.pnm import load_mask, load_rgb
from camoflow.storage import atomic_write_text

logger = get_logger('camoflow.dataset')

PathLike = Union[str, Path]
SPLITS = ('train', 'val', 'test')


@dataclass
class Sample:
    """One image/mask pair: image (1, 3, H, W) in [0, 1], mask (1, 1, H, W) in {0, 1}"""
    image: Tensor
    mask: Tensor
    id: str
    original_size: Tuple[int, int] = (0, 0)


@dataclass
class ManifestEntry:
    id: str
    image: Path
    mask: Path


@dataclass
class Manifest:
    """Ordered sample list of one split"""
    entries: List[ManifestEntry] = field(default_factory=list)
    split: str = 'train'

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def ids(self) -> List[str]:
        return [entry.id for entry in self.entries]


# ==========================================================================
# Manifest files
# ==========================================================================

def read_manifest(path: PathLike, split: Optional[str] = None) -> Manifest:
    """
    Parse a manifest file

    Args:
        path: TSV file
        split: Split name; defaults to the file stem when it is a known split

    Raises:
        DataIOError: If the file cannot be read or names a missing image or mask
        FormatError: On malformed lines or duplicate ids (with line number)
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise DataIOError(f"Cannot read manifest {path}: {e}")

    base = path.parent
    entries: List[ManifestEntry] = []
    seen = set()
    for number, line in enumerate(text.split('\n'), start=1):
        if not line.strip():
            continue
        parts = line.rstrip('\r').split('\t')
        if len(parts) != 3:
            raise FormatError(f"{path}:{number}: expected 3 tab-separated fields, got {len(parts)}")
        sample_id, image, mask = parts
        if sample_id in seen:
            raise FormatError(f"{path}:{number}: duplicate sample id '{sample_id}'")
        seen.add(sample_id)
        entry = ManifestEntry(id=sample_id, image=base / image, mask=base / mask)
        for kind, target in (('image', entry.image), ('mask', entry.mask)):
            if not target.is_file():
                raise DataIOError(f"{path}:{number}: {kind} not found for '{sample_id}': {target}")
        entries.append(entry)

    if split is None:
        split = path.stem if path.stem in SPLITS else 'test'
    logger.debug(f"Read manifest {path}: {len(entries)} entries ({split})")
    return Manifest(entries=entries, split=split)


def write_manifest(manifest: Manifest, path: PathLike) -> None:
    """Write entries with paths relative to the manifest directory"""
    path = Path(path)
    base = path.parent.resolve()
    lines = []
    for entry in manifest:
        image = Path(entry.image).resolve().relative_to(base).as_posix()
        mask = Path(entry.mask).resolve().relative_to(base).as_posix()
        lines.append(f"{entry.id}\t{image}\t{mask}\n")
    atomic_write_text(path, ''.join(lines))


# ==========================================================================
# Resizing
# ==========================================================================

def resize_bilinear(planes: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Bilinear resize of (..., H, W) with the same weights as the network's resize"""
    h, w = planes.shape[-2:]
    if (h, w) == tuple(size):
        return planes
    mh = F.bilinear_matrix(h, size[0], np.float64)
    mw = F.bilinear_matrix(w, size[1], np.float64)
    return (mh @ planes.astype(np.float64) @ mw.T).astype(planes.dtype)


def resize_nearest(plane: np.ndarray, size: Tuple[int, int]) -> np.ndarray:
    """Nearest-neighbour resize of (..., H, W); preserves the value set"""
    h, w = plane.shape[-2:]
    if (h, w) == tuple(size):
        return plane
    rows = np.minimum(((np.arange(size[0]) + 0.5) * h / size[0]).astype(np.int64), h - 1)
    cols = np.minimum(((np.arange(size[1]) + 0.5) * w / size[1]).astype(np.int64), w - 1)
    return plane[..., rows[:, None], cols[None, :]]


# ==========================================================================
# Samples
# ==========================================================================

def load_image(path: PathLike, input_size: Optional[int] = None) -> Tuple[Tensor, Tuple[int, int]]:
    """
    Load a P6 image as a (1, 3, S, S) tensor

    Returns:
        (image tensor, original (H, W))
    """
    rgb = load_rgb(path)
    original = (rgb.shape[1], rgb.shape[2])
    if input_size is not None:
        rgb = resize_bilinear(rgb, (input_size, input_size))
    return Tensor(np.clip(rgb, 0.0, 1.0)[None]), original


def load_sample(
    image_path: PathLike,
    mask_path: PathLike,
    input_size: Optional[int] = None,
    sample_id: Optional[str] = None,
) -> Sample:
    """
    Load an image/mask pair

    Args:
        image_path: P6 image
        mask_path: P5 mask, binarized at half of maxval
        input_size: Square output side; None keeps the file size
        sample_id: Defaults to the image file stem

    Raises:
        FormatError: Malformed file (with byte offset)
        DimensionError: Image and mask sizes differ
    """
    rgb = load_rgb(image_path)
    mask = load_mask(mask_path, binarize=True)
    if rgb.shape[1:] != mask.shape:
        raise DimensionError(
            f"load_sample: image {image_path} is {rgb.shape[1]}x{rgb.shape[2]} "
            f"but mask {mask_path} is {mask.shape[0]}x{mask.shape[1]}"
        )
    original = (mask.shape[0], mask.shape[1])
    if input_size is not None:
        rgb = np.clip(resize_bilinear(rgb, (input_size, input_size)), 0.0, 1.0)
        mask = resize_nearest(mask, (input_size, input_size))
    return Sample(
        image=Tensor(rgb[None]),
        mask=Tensor(mask[None, None]),
        id=sample_id if sample_id is not None else Path(image_path).stem,
        original_size=original,
    )


def load_entry(entry: ManifestEntry, input_size: Optional[int] = None) -> Sample:
    return load_sample(entry.image, entry.mask, input_size, entry.id)


# ==========================================================================
# Batches
# ==========================================================================

@dataclass
class Batch:
    images: Tensor
    masks: Tensor
    ids: List[str]

    def __len__(self) -> int:
        return len(self.ids)


def collate(samples: Sequence[Sample]) -> Batch:
    """Stack samples of equal size into a batch"""
    sizes = {sample.image.shape[2:] for sample in samples}
    if len(sizes) != 1:
        raise DimensionError(f"collate: samples have different sizes {sorted(sizes)}")
    return Batch(
        images=Tensor(np.concatenate([s.image.data for s in samples])),
        masks=Tensor(np.concatenate([s.mask.data for s in samples])),
        ids=[s.id for s in samples],
    )


_DONE = object()


class BatchLoader:
    """
    Iterate batches of a manifest in a given order

    A producer thread reads and collates batches ahead of the consumer; at
    most `prefetch` finished batches wait in the queue. Errors raised while
    loading are re-raised in the consuming thread.

    Example:
        >>> for batch in BatchLoader(manifest, order, batch_size=8, input_size=64):
        ...     train_step(batch)
    """

    def __init__(
        self,
        manifest: Manifest,
        order: Optional[Sequence[int]] = None,
        batch_size: int = 8,
        input_size: Optional[int] = None,
        prefetch: int = 2,
    ):
        if not len(manifest):
            raise ConfigurationError(f"Manifest for split '{manifest.split}' is empty")
        if batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
        self.manifest = manifest
        self.order = list(range(len(manifest))) if order is None else [int(i) for i in order]
        self.batch_size = batch_size
        self.input_size = input_size
        self.prefetch = max(1, prefetch)

    def __len__(self) -> int:
        return (len(self.order) + self.batch_size - 1) // self.batch_size

    def _chunks(self) -> Iterator[List[int]]:
        for start in range(0, len(self.order), self.batch_size):
            yield self.order[start:start + self.batch_size]

    def _produce(self, handoff: "queue.Queue", stop: threading.Event) -> None:
        try:
            for chunk in self._chunks():
                if stop.is_set():
                    return
                samples = [load_entry(self.manifest.entries[i], self.input_size) for i in chunk]
                handoff.put(collate(samples))
        except BaseException as e:  # forwarded to the consumer
            handoff.put(e)
        finally:
            handoff.put(_DONE)

    def __iter__(self) -> Iterator[Batch]:
        handoff: "queue.Queue" = queue.Queue(maxsize=self.prefetch)
        stop = threading.Event()
        worker = threading.Thread(target=self._produce, args=(handoff, stop), daemon=True)
        worker.start()
        try:
            while True:
                item = handoff.get()
                if item is _DONE:
                    break
                if isinstance(item, BaseException):
                    raise item
                yield item
        finally:
            stop.set()
            while worker.is_alive():
                try:
                    handoff.get(timeout=0.05)
                except queue.Empty:
                    pass
            worker.join()
