"""
CamoFlow Input Validation

Centralized checks for configuration values and user-supplied paths.
Every failure names the offending field so the CLI can report it verbatim.
"""

from pathlib import Path
from typing import Iterable, Union

from camoflow.exceptions import ConfigurationError, DataIOError
from camoflow.logging_config import get_logger

logger = get_logger('camoflow.validators')

Number = Union[int, float]


class InputValidator:
    """Centralized validation for configuration fields and paths"""

    @staticmethod
    def validate_positive_int(field: str, value: int) -> int:
        """
        Validate a strictly positive integer

        Raises:
            ConfigurationError: If value is not an int or is < 1
        """
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{field} must be an integer, got {value!r}")
        if value < 1:
            raise ConfigurationError(f"{field} must be >= 1, got {value}")
        return value

    @staticmethod
    def validate_non_negative_int(field: str, value: int) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or value < 0:
            raise ConfigurationError(f"{field} must be a non-negative integer, got {value!r}")
        return value

    @staticmethod
    def validate_positive(field: str, value: Number) -> float:
        """Validate a strictly positive real (rates, step sizes)"""
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise ConfigurationError(f"{field} must be positive, got {value!r}")
        return float(value)

    @staticmethod
    def validate_non_negative(field: str, value: Number) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value >= 0:
            raise ConfigurationError(f"{field} must be non-negative, got {value!r}")
        return float(value)

    @staticmethod
    def validate_open_unit(field: str, value: Number) -> float:
        """Validate a real strictly inside (0, 1)"""
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0 < value < 1:
            raise ConfigurationError(f"{field} must lie in (0, 1), got {value!r}")
        return float(value)

    @staticmethod
    def validate_divisible(field: str, value: int, divisor: int) -> int:
        InputValidator.validate_positive_int(field, value)
        if value % divisor:
            raise ConfigurationError(f"{field} must be divisible by {divisor}, got {value}")
        return value

    @staticmethod
    def validate_choice(field: str, value: str, choices: Iterable[str]) -> str:
        choices = tuple(choices)
        if value not in choices:
            raise ConfigurationError(f"{field} must be one of {choices}, got {value!r}")
        return value

    @staticmethod
    def validate_existing_file(path: Union[str, Path], what: str = "file") -> Path:
        """
        Validate that a path names an existing regular file

        Raises:
            DataIOError: If the file does not exist
        """
        path = Path(path)
        if not path.is_file():
            logger.warning(f"Missing {what}: {path}")
            raise DataIOError(f"{what} not found: {path}")
        return path

    @staticmethod
    def validate_output_dir(path: Union[str, Path]) -> Path:
        """
        Create (if needed) and return an output directory

        Raises:
            DataIOError: If the directory cannot be created
        """
        path = Path(path)
        try:
            path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataIOError(f"Cannot create output directory {path}: {e}")
        return path
