"""
CamoFlow Ablation Runs

Trains and evaluates module substitutions on one corpus and seed:
- full: MSFI + MSKM + SBD
- no-sbd, no-mskm, no-mskm-no-sbd: the {use_mskm, use_sbd} grid with MSFI on
- no-msfi: plain fusion, everything else on

Each variant gets its own subdirectory (named by AblationConfig.label())
holding the usual training and evaluation outputs. A summary with
parameter counts and metrics is written to ablation.json.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from camoflow.config import AblationConfig, Config
from camoflow.data.dataset import Manifest
from camoflow.evaluation import eval_cmd
from camoflow.logging_config import get_logger, log_operation
from camoflow.metrics import MetricsReport
from camoflow.model.network import build_model
from camoflow.storage import atomic_write_text
from camoflow.training import Trainer
from camoflow.validators import InputValidator

logger = get_logger('camoflow.ablation')

PathLike = Union[str, Path]
ABLATION_FILE = 'ablation.json'

VARIANTS = (
    AblationConfig(use_msfi=True, use_mskm=True, use_sbd=True),
    AblationConfig(use_msfi=True, use_mskm=True, use_sbd=False),
    AblationConfig(use_msfi=True, use_mskm=False, use_sbd=True),
    AblationConfig(use_msfi=True, use_mskm=False, use_sbd=False),
    AblationConfig(use_msfi=False, use_mskm=True, use_sbd=True),
)


@dataclass
class AblationRun:
    """Outcome of training and evaluating one variant"""
    ablation: AblationConfig
    parameters: int
    epochs_run: int
    steps: int
    best_val_mae: float
    metrics: MetricsReport

    @property
    def variant(self) -> str:
        return self.ablation.label()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'variant': self.variant,
            'use_msfi': self.ablation.use_msfi,
            'use_mskm': self.ablation.use_mskm,
            'use_sbd': self.ablation.use_sbd,
            'parameters': self.parameters,
            'epochs_run': self.epochs_run,
            'steps': self.steps,
            'best_val_mae': self.best_val_mae,
            'metrics': self.metrics.aggregate(),
        }


@dataclass
class AblationResult:
    seed: int
    runs: List[AblationRun] = field(default_factory=list)

    def run(self, variant: str) -> AblationRun:
        for run in self.runs:
            if run.variant == variant:
                return run
        raise KeyError(variant)

    def to_dict(self) -> Dict[str, Any]:
        return {'seed': self.seed, 'variants': [run.to_dict() for run in self.runs]}

    def save(self, path: PathLike) -> None:
        atomic_write_text(Path(path), json.dumps(self.to_dict(), indent=2) + "\n")


def run_ablation(
    cfg: Config,
    train_manifest: Manifest,
    val_manifest: Optional[Manifest],
    out_dir: PathLike,
    eval_manifest: Optional[Manifest] = None,
    variants: Sequence[AblationConfig] = VARIANTS,
) -> AblationResult:
    """
    Train and evaluate every variant with the same seed and data

    Args:
        cfg: Base configuration; its ablation field is replaced per variant
        train_manifest: Training samples
        val_manifest: Early-stopping samples (training set when None)
        out_dir: Root directory; one subdirectory per variant
        eval_manifest: Samples scored after training (validation set when None)
        variants: Substitutions to run, in report order

    Returns:
        AblationResult in variant order (also saved as ablation.json)
    """
    out_dir = InputValidator.validate_output_dir(out_dir)
    scored = eval_manifest or val_manifest or train_manifest
    result = AblationResult(seed=cfg.seed)

    for ablation in variants:
        variant_cfg = cfg.with_overrides(ablation=ablation)
        run_dir = out_dir / ablation.label()
        with log_operation(logger, f"ablation variant {ablation.label()}"):
            model = build_model(variant_cfg)
            trainer = Trainer(variant_cfg, model, train_manifest, val_manifest, run_dir)
            trained = trainer.fit()
            metrics = eval_cmd(variant_cfg, trained.checkpoint, scored, run_dir / 'eval')
        result.runs.append(AblationRun(
            ablation=ablation,
            parameters=model.num_parameters(),
            epochs_run=trained.epochs_run,
            steps=trained.steps,
            best_val_mae=trained.best_val_mae,
            metrics=metrics,
        ))
        logger.info(
            f"{ablation.label()}: {model.num_parameters():,} parameters, "
            f"MAE={metrics.mae:.6f} S={metrics.s_alpha:.6f}"
        )

    result.save(out_dir / ABLATION_FILE)
    return result
