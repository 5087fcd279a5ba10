"""
CamoFlow Training Loop

- Per-epoch shuffling from a seeded generator
- Per batch: forward, deep supervision loss, backward, Adam step
- Validation MAE on the final masks after every epoch
- Best checkpoint kept as best.cofi, latest as last.cofi (for --resume)
- Early stopping once epochs_since_best reaches the patience
- train_log.tsv with one line per epoch
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np
from scipy.special import expit

from camoflow.autograd.optim import Adam
from camoflow.autograd.tensor import no_grad
from camoflow.checkpoint import (
    TRAIN_STATE_FILE,
    TrainState,
    load_into,
    load_train_state,
    save_checkpoint,
    save_train_state,
)
from camoflow.config import Config
from camoflow.data.dataset import Batch, BatchLoader, Manifest
from camoflow.exceptions import ConfigurationError, NumericError, StateError
from camoflow.logging_config import get_logger, log_operation, run_log
from camoflow.losses import LossReport, LossWeights, deep_supervision_loss
from camoflow.model.network import CamoNet
from camoflow.performance import PerformanceMonitor, get_monitor

logger = get_logger('camoflow.training')

PathLike = Union[str, Path]

BEST_CHECKPOINT = 'best.cofi'
LAST_CHECKPOINT = 'last.cofi'
CONFIG_FILE = 'config.json'
LOG_FILE = 'train_log.tsv'
LOG_COLUMNS = ('epoch', 'total', 'final', 'coarse', 'fine', 'aux', 'val_mae')


@dataclass
class EpochRecord:
    """Mean batch losses of one epoch plus the validation MAE"""
    epoch: int
    total: float
    final: float
    coarse: float
    fine: float
    aux: float
    val_mae: float

    def to_tsv(self) -> str:
        values = [f"{getattr(self, name):.8f}" for name in LOG_COLUMNS[1:]]
        return '\t'.join([str(self.epoch)] + values) + '\n'


@dataclass
class TrainResult:
    epochs_run: int
    steps: int
    best_val_mae: float
    stopped_early: bool
    checkpoint: Path
    log_path: Path
    history: List[EpochRecord] = field(default_factory=list)
    step_losses: List[float] = field(default_factory=list)


class Trainer:
    """
    Deep-supervision trainer for CamoNet

    Example:
        >>> trainer = Trainer(cfg, build_model(cfg), train_manifest, val_manifest, out_dir)
        >>> result = trainer.fit()
    """

    def __init__(
        self,
        cfg: Config,
        model: CamoNet,
        train_manifest: Manifest,
        val_manifest: Optional[Manifest],
        out_dir: PathLike,
        monitor: Optional[PerformanceMonitor] = None,
        on_epoch_end: Optional[Callable[[EpochRecord], None]] = None,
    ):
        if not len(train_manifest):
            raise ConfigurationError("Training manifest is empty")
        if val_manifest is not None and not len(val_manifest):
            raise ConfigurationError("Validation manifest is empty")
        self.cfg = cfg
        self.model = model
        self.train_manifest = train_manifest
        self.val_manifest = val_manifest if val_manifest is not None else train_manifest
        self.out_dir = Path(out_dir)
        self.monitor = monitor or get_monitor()
        self.on_epoch_end = on_epoch_end

        self.params = model.parameters()
        self.optimizer = Adam(
            self.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
            eps=cfg.adam_eps, weight_decay=cfg.weight_decay,
        )
        self.weights = LossWeights(aux=cfg.aux_weight)
        self.rng = np.random.default_rng([cfg.seed, 1])
        self.state = TrainState()

    @property
    def log_path(self) -> Path:
        return self.out_dir / LOG_FILE

    @property
    def checkpoint_path(self) -> Path:
        return self.out_dir / BEST_CHECKPOINT

    # ------------------------------------------------------------------
    # Steps
    # ------------------------------------------------------------------

    def train_step(self, batch: Batch) -> LossReport:
        """
        One optimizer update

        Raises:
            NumericError: If the loss is not finite (naming the batch)
        """
        with self.monitor.measure('train_step', images=len(batch)):
            self.optimizer.zero_grad()
            output = self.model(batch.images)
            report = deep_supervision_loss(
                output.masks, output.aux, batch.masks, self.weights,
                self.cfg.dda_lambda, self.cfg.dda_kernel,
            )
            if not math.isfinite(report.total):
                raise NumericError(
                    f"Non-finite loss {report.total} at step {self.state.step} "
                    f"on batch [{', '.join(batch.ids)}]"
                )
            report.objective.backward()
            self.optimizer.step()
            self.state.step += 1
        return report

    def validate(self) -> float:
        """Mean per-image MAE of sigmoid(final) on the validation manifest"""
        errors: List[float] = []
        with self.monitor.measure('validation', images=len(self.val_manifest)), no_grad():
            loader = BatchLoader(self.val_manifest, None, self.cfg.batch_size, self.cfg.input_size)
            for batch in loader:
                final = expit(self.model(batch.images).masks.final.data.astype(np.float64))
                target = batch.masks.data.astype(np.float64)
                errors.extend(np.abs(final - target).mean(axis=(1, 2, 3)).tolist())
        return float(np.mean(errors))

    # ------------------------------------------------------------------
    # Loop
    # ------------------------------------------------------------------

    def _steps_left(self) -> bool:
        return self.cfg.max_steps is None or self.state.step < self.cfg.max_steps

    def _run_epoch(self, epoch: int, step_losses: List[float]) -> EpochRecord:
        order = self.rng.permutation(len(self.train_manifest))
        loader = BatchLoader(self.train_manifest, order, self.cfg.batch_size, self.cfg.input_size)
        sums = {'total': 0.0, 'final': 0.0, 'coarse': 0.0, 'fine': 0.0, 'aux': 0.0}
        batches = 0
        for batch in loader:
            if not self._steps_left():
                break
            report = self.train_step(batch)
            for key, value in report.to_dict().items():
                sums[key] += value
            step_losses.append(report.total)
            batches += 1
        if batches == 0:
            raise StateError(f"Epoch {epoch} ran no batches")
        means = {key: value / batches for key, value in sums.items()}
        return EpochRecord(epoch=epoch, val_mae=self.validate(), **means)

    def _append_log(self, record: EpochRecord) -> None:
        fresh = not self.log_path.exists()
        with open(self.log_path, 'a', encoding='utf-8', newline='\n') as f:
            if fresh:
                f.write('\t'.join(LOG_COLUMNS) + '\n')
            f.write(record.to_tsv())

    def resume(self) -> None:
        """
        Restore weights, Adam moments and counters from the output directory

        Raises:
            StateError: If there is nothing to resume from
        """
        if not (self.out_dir / TRAIN_STATE_FILE).exists():
            raise StateError(f"No {TRAIN_STATE_FILE} in {self.out_dir} to resume from")
        load_into(self.model, self.out_dir / LAST_CHECKPOINT)
        shapes = {param.name: param.shape for param in self.params}
        self.state = load_train_state(self.out_dir, self.optimizer.state, shapes)
        if self.state.rng_state:
            self.rng.bit_generator.state = self.state.rng_state

    def fit(self, resume: bool = False) -> TrainResult:
        """
        Train until the epochs, step budget or patience run out

        Args:
            resume: Continue from the state saved in out_dir

        Returns:
            TrainResult summarizing the run
        """
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if resume:
            self.resume()
        else:
            self.log_path.unlink(missing_ok=True)
        self.cfg.save(self.out_dir / CONFIG_FILE)

        history: List[EpochRecord] = []
        step_losses: List[float] = []
        stopped_early = False
        with run_log(self.out_dir), log_operation(logger, f"train ({self.cfg.ablation.label()})"):
            for epoch in range(self.state.epoch, self.cfg.epochs):
                if not self._steps_left():
                    break
                record = self._run_epoch(epoch, step_losses)
                history.append(record)
                if self.state.record_validation(record.val_mae):
                    save_checkpoint(self.model, self.checkpoint_path)
                self.state.epoch = epoch + 1
                self.state.rng_state = self.rng.bit_generator.state
                save_checkpoint(self.model, self.out_dir / LAST_CHECKPOINT)
                save_train_state(self.out_dir, self.state, self.optimizer.state)
                self._append_log(record)
                logger.info(
                    f"Epoch {epoch}: total={record.total:.6f} final={record.final:.6f} "
                    f"coarse={record.coarse:.6f} fine={record.fine:.6f} aux={record.aux:.6f} "
                    f"val_mae={record.val_mae:.6f} (best {self.state.best_val_mae:.6f})"
                )
                if self.on_epoch_end is not None:
                    self.on_epoch_end(record)
                if self.state.epochs_since_best >= self.cfg.early_stop_patience:
                    stopped_early = True
                    logger.info(
                        f"Early stopping after epoch {epoch}: no improvement for "
                        f"{self.state.epochs_since_best} epochs"
                    )
                    break
            logger.info(self.monitor.report())
        return TrainResult(
            epochs_run=len(history),
            steps=self.state.step,
            best_val_mae=self.state.best_val_mae,
            stopped_early=stopped_early,
            checkpoint=self.checkpoint_path,
            log_path=self.log_path,
            history=history,
            step_losses=step_losses,
        )


def train(
    cfg: Config,
    train_manifest: Manifest,
    val_manifest: Optional[Manifest],
    out_dir: PathLike,
    resume: bool = False,
    on_epoch_end: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """Build a model from cfg and train it"""
    from camoflow.model.network import build_model

    trainer = Trainer(cfg, build_model(cfg), train_manifest, val_manifest, out_dir, on_epoch_end=on_epoch_end)
    return trainer.fit(resume=resume)
