"""
CamoFlow Atomic File Writes

Checkpoints, training state and reports are written through a temp file in
the target directory followed by an atomic rename, so an interrupted run
never leaves a half-written file behind. Checkpoint writes can keep the
previous version as a .backup copy.
"""

import os
import shutil
import tempfile
from pathlib import Path

from camoflow.exceptions import DataIOError
from camoflow.logging_config import get_logger

logger = get_logger('camoflow.storage')


def atomic_write_bytes(target_file: Path, payload: bytes, keep_backup: bool = False) -> None:
    """
    Atomically write bytes to a file

    Args:
        target_file: Destination path
        payload: File content
        keep_backup: Copy an existing file to <name>.backup first

    Raises:
        DataIOError: If the write fails
    """
    target_file = Path(target_file)
    try:
        target_file.parent.mkdir(parents=True, exist_ok=True)
        if keep_backup and target_file.exists():
            shutil.copy2(target_file, target_file.with_name(target_file.name + '.backup'))
            logger.debug(f"Created backup: {target_file}.backup")
        temp_fd, temp_path = tempfile.mkstemp(
            dir=target_file.parent,
            prefix='.camoflow_',
            suffix='.tmp'
        )
    except OSError as e:
        raise DataIOError(f"Cannot write {target_file}: {e}")

    try:
        with os.fdopen(temp_fd, 'wb') as f:
            f.write(payload)
            f.flush()
            os.fsync(f.fileno())
        shutil.move(temp_path, target_file)
        logger.debug(f"Atomic write completed: {target_file}")
    except Exception as e:
        if os.path.exists(temp_path):
            try:
                os.unlink(temp_path)
            except OSError as cleanup_error:
                logger.error(f"Failed to cleanup temp file: {cleanup_error}")
        if isinstance(e, OSError):
            raise DataIOError(f"Cannot write {target_file}: {e}")
        raise


def atomic_write_text(target_file: Path, text: str, keep_backup: bool = False) -> None:
    """UTF-8, LF-terminated text variant of atomic_write_bytes"""
    atomic_write_bytes(target_file, text.encode('utf-8'), keep_backup=keep_backup)
