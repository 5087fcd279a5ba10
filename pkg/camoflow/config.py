"""
CamoFlow Configuration

Run configuration as a dataclass:
- Defaults follow the published training recipe (384 input, Adam lr 1e-3,
  weight decay 1e-4, batch 8, 100 epochs with early stopping)
- JSON config files override defaults; CLI flags override files
- .env files are honoured for COFINET_THREADS and CAMOFLOW_LOG_DIR
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from dotenv import load_dotenv

from camoflow.autograd.functional import ACTIVATIONS
from camoflow.exceptions import ConfigurationError, DataIOError
from camoflow.logging_config import get_logger
from camoflow.validators import InputValidator

logger = get_logger('camoflow.config')

THREADS_ENV = "COFINET_THREADS"


@dataclass
class AblationConfig:
    """Module substitutions for ablation runs"""
    use_msfi: bool = True
    use_mskm: bool = True
    use_sbd: bool = True

    def label(self) -> str:
        off = [name for name, on in (('msfi', self.use_msfi), ('mskm', self.use_mskm), ('sbd', self.use_sbd)) if not on]
        return 'full' if not off else 'no-' + '-no-'.join(off)


@dataclass
class Config:
    """
    Complete run configuration

    Example:
        >>> cfg = Config(input_size=64, batch_size=4)
        >>> cfg.validate()
    """
    input_size: int = 384
    lr: float = 1e-3
    weight_decay: float = 1e-4
    batch_size: int = 8
    epochs: int = 100
    early_stop_patience: int = 10
    widths: Tuple[int, int, int, int] = (32, 64, 128, 256)
    latent_dim: int = 256
    mskm_depth: int = 2
    ablation: AblationConfig = field(default_factory=AblationConfig)
    seed: int = 0

    # Architecture details
    decoder_width: int = 16
    sbd_hidden: int = 64
    activation: str = 'gelu'
    mac_kinds: Tuple[str, ...] = ('relu', 'gelu', 'tanh', 'sigmoid')

    # Loss
    aux_weight: float = 0.5
    dda_lambda: float = 5.0
    dda_kernel: int = 31

    # Optimizer
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    max_steps: Optional[int] = None

    # Metrics
    beta_sq: float = 0.3
    s_alpha_weight: float = 0.5

    # Synthetic data
    similarity: float = 0.1
    occluder_prob: float = 0.3

    threads: Optional[int] = None

    def validate(self) -> "Config":
        """
        Check every field

        Returns:
            self, for chaining

        Raises:
            ConfigurationError: Naming the first offending field
        """
        v = InputValidator
        v.validate_divisible('input_size', self.input_size, 32)
        v.validate_positive('lr', self.lr)
        v.validate_non_negative('weight_decay', self.weight_decay)
        v.validate_positive_int('batch_size', self.batch_size)
        v.validate_positive_int('epochs', self.epochs)
        v.validate_positive_int('early_stop_patience', self.early_stop_patience)
        if len(self.widths) != 4:
            raise ConfigurationError(f"widths must list 4 channel counts, got {self.widths}")
        for level, width in enumerate(self.widths, start=1):
            v.validate_positive_int(f'widths[C{level}]', width)
            if width % len(self.mac_kinds):
                raise ConfigurationError(
                    f"widths[C{level}]={width} must be divisible by the {len(self.mac_kinds)} mac_kinds"
                )
        v.validate_positive_int('latent_dim', self.latent_dim)
        v.validate_positive_int('mskm_depth', self.mskm_depth)
        v.validate_non_negative_int('seed', self.seed)
        v.validate_positive_int('decoder_width', self.decoder_width)
        v.validate_positive_int('sbd_hidden', self.sbd_hidden)
        v.validate_choice('activation', self.activation, ACTIVATIONS)
        if not self.mac_kinds:
            raise ConfigurationError("mac_kinds must name at least one activation")
        for kind in self.mac_kinds:
            v.validate_choice('mac_kinds', kind, ACTIVATIONS)
        v.validate_non_negative('aux_weight', self.aux_weight)
        v.validate_non_negative('dda_lambda', self.dda_lambda)
        v.validate_positive_int('dda_kernel', self.dda_kernel)
        if self.dda_kernel % 2 == 0:
            raise ConfigurationError(f"dda_kernel must be odd, got {self.dda_kernel}")
        v.validate_open_unit('beta1', self.beta1)
        v.validate_open_unit('beta2', self.beta2)
        v.validate_positive('adam_eps', self.adam_eps)
        if self.max_steps is not None:
            v.validate_positive_int('max_steps', self.max_steps)
        v.validate_open_unit('beta_sq', self.beta_sq)
        v.validate_open_unit('s_alpha_weight', self.s_alpha_weight)
        v.validate_non_negative('similarity', self.similarity)
        if not 0 <= self.occluder_prob <= 1:
            raise ConfigurationError(f"occluder_prob must lie in [0, 1], got {self.occluder_prob}")
        if self.threads is not None:
            v.validate_positive_int('threads', self.threads)
        return self

    # ------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['widths'] = list(self.widths)
        data['mac_kinds'] = list(self.mac_kinds)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        """
        Build a config from a (possibly partial) dictionary

        Raises:
            ConfigurationError: On unknown keys or malformed values
        """
        return cls().with_overrides(**data)

    def with_overrides(self, **overrides: Any) -> "Config":
        """Copy of this config with the given fields replaced (None values are ignored)"""
        known = {f.name for f in fields(self)}
        data = asdict(self)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigurationError(f"Unknown config field '{key}'")
            data[key] = value
        try:
            ablation = data.pop('ablation')
            if isinstance(ablation, dict):
                unknown = set(ablation) - {f.name for f in fields(AblationConfig)}
                if unknown:
                    raise ConfigurationError(f"Unknown ablation field '{sorted(unknown)[0]}'")
                ablation = AblationConfig(**ablation)
            data['widths'] = tuple(data['widths'])
            data['mac_kinds'] = tuple(data['mac_kinds'])
            return Config(ablation=ablation, **data)
        except TypeError as e:
            raise ConfigurationError(f"Malformed configuration: {e}")

    def save(self, path: Union[str, Path]) -> None:
        from camoflow.storage import atomic_write_text
        atomic_write_text(Path(path), json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def load_environment(dotenv_path: Optional[Path] = None) -> None:
    """Load a .env file (if present) into os.environ without overriding it"""
    load_dotenv(dotenv_path=dotenv_path, override=False)


def resolve_threads(cfg: Optional[Config] = None) -> int:
    """
    Worker count for parallel evaluation

    Order: cfg.threads, then COFINET_THREADS, then the CPU count.

    Raises:
        ConfigurationError: If COFINET_THREADS is not a positive integer
    """
    if cfg is not None and cfg.threads is not None:
        return cfg.threads
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            value = int(raw)
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}")
        return InputValidator.validate_positive_int(THREADS_ENV, value)
    return os.cpu_count() or 1


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> Config:
    """
    Load defaults, then an optional JSON file, then explicit overrides

    Args:
        path: JSON config file
        **overrides: Field values from CLI flags (None means "not given")

    Returns:
        Validated Config

    Raises:
        DataIOError: If the file cannot be read
        ConfigurationError: If the file or overrides are invalid
    """
    cfg = Config()
    if path is not None:
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except OSError as e:
            raise DataIOError(f"Cannot read config {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError(f"Config {path} must contain a JSON object")
        cfg = Config.from_dict(data)
        logger.info(f"Loaded config from {path}")

    ablation = overrides.pop('ablation', None)
    cfg = cfg.with_overrides(**overrides)
    if ablation:
        merged = asdict(cfg.ablation)
        merged.update({k: v for k, v in ablation.items() if v is not None})
        cfg = cfg.with_overrides(ablation=merged)
    return cfg.validate()
