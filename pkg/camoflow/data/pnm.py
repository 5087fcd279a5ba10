"""
Binary PPM (P6) / PGM (P5) images

Headers are parsed token by token ("#" comments allowed) and a single
whitespace byte separates the header from the raster. Every parse failure
reports the byte offset where it happened.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from camoflow.autograd.tensor import Tensor
from camoflow.exceptions import DataIOError, DimensionError, FormatError
from camoflow.logging_config import get_logger
from camoflow.storage import atomic_write_bytes

logger = get_logger('camoflow.pnm')

PathLike = Union[str, Path]
CHANNELS = {b'P5': 1, b'P6': 3}
WHITESPACE = b' \t\n\r\x0b\x0c'


@dataclass
class PnmImage:
    """Decoded raster: (H, W) for P5 or (H, W, 3) for P6, uint8"""
    magic: str
    width: int
    height: int
    maxval: int
    pixels: np.ndarray

    @property
    def channels(self) -> int:
        return 1 if self.magic == 'P5' else 3


def _next_token(payload: bytes, offset: int, source: str) -> Tuple[bytes, int]:
    """Skip whitespace and comments, return (token, offset just past it)"""
    n = len(payload)
    while offset < n:
        byte = payload[offset:offset + 1]
        if byte in WHITESPACE:
            offset += 1
        elif byte == b'#':
            end = payload.find(b'\n', offset)
            offset = n if end < 0 else end + 1
        else:
            break
    if offset >= n:
        raise FormatError(f"{source}: truncated header at byte {offset}")
    start = offset
    while offset < n and payload[offset:offset + 1] not in WHITESPACE:
        offset += 1
    return payload[start:offset], offset


def _header_int(payload: bytes, offset: int, source: str, what: str) -> Tuple[int, int]:
    token, end = _next_token(payload, offset, source)
    if not token.isdigit():
        raise FormatError(f"{source}: bad {what} {token!r} at byte {end - len(token)}")
    return int(token), end


def parse_pnm(payload: bytes, source: str = '<bytes>') -> PnmImage:
    """
    Decode a P5/P6 file held in memory

    Args:
        payload: Raw file bytes
        source: Name used in error messages

    Raises:
        FormatError: Bad magic, malformed header or truncated raster (with byte offset)
    """
    magic = payload[:2]
    if magic not in CHANNELS:
        raise FormatError(f"{source}: bad magic {magic!r} at byte 0 (expected P5 or P6)")
    offset = 2
    if offset >= len(payload) or payload[offset:offset + 1] not in WHITESPACE:
        raise FormatError(f"{source}: missing whitespace after magic at byte {offset}")
    width, offset = _header_int(payload, offset, source, 'width')
    height, offset = _header_int(payload, offset, source, 'height')
    maxval, offset = _header_int(payload, offset, source, 'maxval')
    if width < 1 or height < 1:
        raise FormatError(f"{source}: empty raster {width}x{height} declared before byte {offset}")
    if not 0 < maxval < 256:
        raise FormatError(f"{source}: unsupported maxval {maxval} before byte {offset} (8-bit only)")
    if offset >= len(payload) or payload[offset:offset + 1] not in WHITESPACE:
        raise FormatError(f"{source}: missing whitespace after header at byte {offset}")
    offset += 1

    channels = CHANNELS[magic]
    expected = width * height * channels
    available = len(payload) - offset
    if available < expected:
        raise FormatError(
            f"{source}: truncated raster at byte {len(payload)} "
            f"(expected {expected} bytes from byte {offset}, got {available})"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8, count=expected, offset=offset)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return PnmImage(
        magic=magic.decode('ascii'), width=width, height=height,
        maxval=maxval, pixels=pixels.reshape(shape).copy(),
    )


def read_pnm(path: PathLike) -> PnmImage:
    """
    Read a P5/P6 file

    Raises:
        DataIOError: If the file cannot be read
        FormatError: If its content is malformed
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"Cannot read {path}: {e}")
    return parse_pnm(payload, str(path))


def encode_pnm(pixels: np.ndarray) -> bytes:
    """P5 for (H, W) or P6 for (H, W, 3) uint8 rasters, maxval 255"""
    pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
    if pixels.ndim == 2:
        magic = b'P5'
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b'P6'
    else:
        raise DimensionError(f"encode_pnm: expected (H, W) or (H, W, 3) raster, got {pixels.shape}")
    height, width = pixels.shape[:2]
    header = magic + b'\n' + f"{width} {height}\n255\n".encode('ascii')
    return header + pixels.tobytes()


def write_pnm(path: PathLike, pixels: np.ndarray) -> None:
    """Write a raster atomically; raises DataIOError if the path is unwritable"""
    atomic_write_bytes(Path(path), encode_pnm(pixels))


# ==========================================================================
# Float conversions
# ==========================================================================

def _as_plane(mask: Union[Tensor, np.ndarray]) -> np.ndarray:
    data = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
    squeezed = np.squeeze(data)
    if squeezed.ndim != 2:
        raise DimensionError(f"save_mask: expected a single-channel mask, got shape {data.shape}")
    return squeezed


def quantize(values: np.ndarray) -> np.ndarray:
    """floor(255 * v + 0.5) of values clipped to [0, 1] (halves round up)"""
    clipped = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(255.0 * clipped + 0.5).astype(np.uint8)


def save_mask(mask: Union[Tensor, np.ndarray], path: PathLike) -> None:
    """
    Write a [0, 1] mask as an 8-bit P5 PGM

    Args:
        mask: (H, W), (1, H, W) or (1, 1, H, W) values in [0, 1]
        path: Destination file

    Raises:
        DimensionError: If the mask has more than one channel
        DataIOError: If the path is unwritable
    """
    write_pnm(path, quantize(_as_plane(mask)))


def load_mask(path: PathLike, binarize: bool = True) -> np.ndarray:
    """
    Read a P5 mask as float32 (H, W)

    Args:
        binarize: Threshold at half of maxval (128 and up is foreground for
            maxval 255); otherwise return value / maxval

    Raises:
        FormatError: If the file is not a P5 PGM
    """
    image = read_pnm(path)
    if image.magic != 'P5':
        raise FormatError(f"{path}: expected a P5 mask, got {image.magic} at byte 0")
    raw = image.pixels.astype(np.float32)
    if binarize:
        return (2 * image.pixels.astype(np.int32) >= image.maxval).astype(np.float32)
    return raw / np.float32(image.maxval)


def load_rgb(path: PathLike) -> np.ndarray:
    """Read a P6 image as float32 (3, H, W) in [0, 1]"""
    image = read_pnm(path)
    if image.magic != 'P6':
        raise FormatError(f"{path}: expected a P6 image, got {image.magic} at byte 0")
    return (image.pixels.astype(np.float32) / np.float32(image.maxval)).transpose(2, 0, 1).copy()
