"""
CamoFlow Checkpoints

Binary layout (all integers little-endian):

    magic      5 bytes   b"COFI1"
    count      uint32    number of records
    per record:
      name_len uint32
      name     name_len bytes, UTF-8
      shape    4 x int32, right-padded with 1s
      data     prod(shape) x float32, C order

Training state for --resume lives next to the checkpoint: train_state.json
(epoch counters, shuffle RNG, Adam hyperparameters) and optimizer.cofi
(Adam moments as m/<param> and v/<param> records in the same layout).
"""

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from camoflow.autograd.module import Module
from camoflow.autograd.optim import AdamState
from camoflow.exceptions import DataIOError, FormatError
from camoflow.logging_config import get_logger
from camoflow.storage import atomic_write_bytes, atomic_write_text

logger = get_logger('camoflow.checkpoint')

MAGIC = b'COFI1'
MAX_RANK = 4
PathLike = Union[str, Path]

TRAIN_STATE_FILE = 'train_state.json'
OPTIMIZER_FILE = 'optimizer.cofi'


# ==========================================================================
# Tensor records
# ==========================================================================

def encode_records(arrays: "OrderedDict[str, np.ndarray]") -> bytes:
    """
    Serialize named arrays in insertion order

    Raises:
        FormatError: If an array has more than four dimensions
    """
    chunks = [MAGIC, struct.pack('<I', len(arrays))]
    for name, array in arrays.items():
        array = np.asarray(array)
        if array.ndim > MAX_RANK:
            raise FormatError(f"Cannot store '{name}': rank {array.ndim} exceeds {MAX_RANK}")
        encoded = name.encode('utf-8')
        shape = tuple(array.shape) + (1,) * (MAX_RANK - array.ndim)
        chunks.append(struct.pack('<I', len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack('<4i', *shape))
        chunks.append(np.ascontiguousarray(array, dtype='<f4').tobytes())
    return b''.join(chunks)


def decode_records(payload: bytes, source: str = '<bytes>') -> "OrderedDict[str, np.ndarray]":
    """
    Parse a record file into name -> float32 array (shape padded to rank 4)

    Raises:
        FormatError: Bad magic or truncated content, with the byte offset
    """
    if payload[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{source}: bad magic {payload[:len(MAGIC)]!r} at byte 0")
    offset = len(MAGIC)

    def take(size: int, what: str) -> bytes:
        nonlocal offset
        if offset + size > len(payload):
            raise FormatError(f"{source}: truncated {what} at byte {offset}")
        chunk = payload[offset:offset + size]
        offset += size
        return chunk

    (count,) = struct.unpack('<I', take(4, 'record count'))
    records: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack('<I', take(4, 'name length'))
        start = offset
        try:
            name = take(name_len, 'name').decode('utf-8')
        except UnicodeDecodeError:
            raise FormatError(f"{source}: name at byte {start} is not UTF-8")
        shape = struct.unpack('<4i', take(16, f"shape of '{name}'"))
        if any(dim < 0 for dim in shape):
            raise FormatError(f"{source}: negative dimension in shape of '{name}' at byte {offset - 16}")
        size = int(np.prod(shape))
        data = np.frombuffer(take(4 * size, f"data of '{name}'"), dtype='<f4')
        records[name] = data.reshape(shape).astype(np.float32)
    if offset != len(payload):
        raise FormatError(f"{source}: {len(payload) - offset} trailing bytes at byte {offset}")
    return records


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as e:
        raise DataIOError(f"Cannot read {path}: {e}")


# ==========================================================================
# Model parameters
# ==========================================================================

def save_checkpoint(model: Module, path: PathLike) -> None:
    """Write all parameters atomically, keeping the previous file as .backup"""
    path = Path(path)
    atomic_write_bytes(path, encode_records(model.state_dict()), keep_backup=True)
    logger.info(f"Saved checkpoint {path} ({model.num_parameters():,} parameters)")


def load_checkpoint(path: PathLike) -> "OrderedDict[str, np.ndarray]":
    path = Path(path)
    return decode_records(_read(path), str(path))


def load_into(model: Module, path: PathLike) -> None:
    """
    Load a checkpoint into a model of matching architecture

    Raises:
        FormatError: Naming the first missing, extra or mis-shaped parameter
    """
    path = Path(path)
    try:
        model.load_state_dict(load_checkpoint(path))
    except FormatError as e:
        raise FormatError(f"{path}: {e}")
    logger.info(f"Loaded checkpoint {path}")


# ==========================================================================
# Training state
# ==========================================================================

@dataclass
class TrainState:
    """
    Resumable training progress

    epochs_since_best resets to 0 whenever best_val_mae improves.
    """
    epoch: int = 0
    step: int = 0
    best_val_mae: float = float('inf')
    epochs_since_best: int = 0
    rng_state: Dict[str, Any] = field(default_factory=dict)

    def record_validation(self, val_mae: float) -> bool:
        """Update the early-stopping counters; True when val_mae is a new best"""
        if val_mae < self.best_val_mae:
            self.best_val_mae = val_mae
            self.epochs_since_best = 0
            return True
        self.epochs_since_best += 1
        return False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'epoch': self.epoch,
            'step': self.step,
            'best_val_mae': None if not np.isfinite(self.best_val_mae) else self.best_val_mae,
            'epochs_since_best': self.epochs_since_best,
            'rng_state': self.rng_state,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainState":
        best = data.get('best_val_mae')
        return cls(
            epoch=int(data['epoch']),
            step=int(data.get('step', 0)),
            best_val_mae=float('inf') if best is None else float(best),
            epochs_since_best=int(data['epochs_since_best']),
            rng_state=data.get('rng_state', {}),
        )


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.integer):
        return int(value)
    return value


def save_train_state(directory: PathLike, state: TrainState, optimizer: AdamState) -> None:
    """Persist train_state.json and optimizer.cofi atomically"""
    directory = Path(directory)
    moments: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for key in optimizer.m:
        moments[f"m/{key}"] = optimizer.m[key]
        moments[f"v/{key}"] = optimizer.v[key]
    atomic_write_bytes(directory / OPTIMIZER_FILE, encode_records(moments))
    document = {'train': state.to_dict(), 'optimizer': optimizer.hyperparameters()}
    atomic_write_text(directory / TRAIN_STATE_FILE, json.dumps(_jsonable(document), indent=2, sort_keys=True) + "\n")
    logger.debug(f"Saved training state to {directory} (epoch {state.epoch})")


def load_train_state(
    directory: PathLike,
    optimizer: Optional[AdamState] = None,
    shapes: Optional[Dict[str, Tuple[int, ...]]] = None,
) -> TrainState:
    """
    Restore training progress and (optionally) Adam moments in place

    Args:
        directory: Folder holding train_state.json and optimizer.cofi
        optimizer: AdamState to fill with the stored moments
        shapes: Parameter shapes used to undo the rank-4 padding of moments

    Raises:
        DataIOError: If the state files cannot be read
        FormatError: If they are malformed
    """
    directory = Path(directory)
    state_path = directory / TRAIN_STATE_FILE
    try:
        document = json.loads(_read(state_path).decode('utf-8'))
        state = TrainState.from_dict(document['train'])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"{state_path}: malformed training state ({e})")

    if optimizer is not None:
        hyper = document.get('optimizer', {})
        optimizer.step = int(hyper.get('step', 0))
        records = load_checkpoint(directory / OPTIMIZER_FILE)
        optimizer.m.clear()
        optimizer.v.clear()
        for name, array in records.items():
            kind, _, key = name.partition('/')
            if kind not in ('m', 'v') or not key:
                raise FormatError(f"{directory / OPTIMIZER_FILE}: unexpected record '{name}'")
            if shapes is not None and key in shapes:
                if array.size != int(np.prod(shapes[key])):
                    raise FormatError(
                        f"{directory / OPTIMIZER_FILE}: moment '{name}' has {array.size} values, "
                        f"parameter has shape {shapes[key]}"
                    )
                array = array.reshape(shapes[key])
            getattr(optimizer, kind)[key] = array.astype(np.float64)
    logger.info(f"Resuming from epoch {state.epoch} (best val MAE {state.best_val_mae:.6f})")
    return state
