"""
CamoFlow - Coarse-to-Fine Camouflaged Object Detection

A desk-scale detector built on a small numpy autodiff engine:
- Multi-scale feature fusion and selective-kernel feature extraction
- Coarse U-Net, spatial broadcast and final decoders with deep supervision
- Camouflage metrics (MAE, S-measure, E-measure, F-measure)
- Synthetic camouflage corpus, training, evaluation and gradient checks
"""

__version__ = "0.1.0"
__author__ = "CamoFlow Team"

from camoflow.logging_config import setup_logging, get_logger, log_operation
from camoflow.exceptions import (
    CamoFlowError, ConfigurationError, DimensionError, TargetRangeError,
    DataIOError, FormatError, NumericError, GradCheckFailure, StateError,
    exit_code_for
)
from camoflow.validators import InputValidator
from camoflow.config import AblationConfig, Config, load_config
from camoflow.performance import PerformanceMonitor, get_monitor, timed
from camoflow.model import CamoNet, build_model
from camoflow.losses import LossWeights, deep_supervision_loss
from camoflow.metrics import MetricsConfig, MetricsReport, evaluate_dir
from camoflow.training import Trainer, train
from camoflow.evaluation import Predictor, eval_cmd, infer
from camoflow.diagnostics import GradCheckReport, run_gradcheck
from camoflow.ablation import AblationResult, run_ablation
from camoflow.cli import CLI, get_cli
from camoflow.commands import CamoFlowCommands, main as cli_main

__all__ = [
    'setup_logging',
    'get_logger',
    'log_operation',
    'CamoFlowError',
    'ConfigurationError',
    'DimensionError',
    'TargetRangeError',
    'DataIOError',
    'FormatError',
    'NumericError',
    'GradCheckFailure',
    'StateError',
    'exit_code_for',
    'InputValidator',
    'AblationConfig',
    'Config',
    'load_config',
    'PerformanceMonitor',
    'get_monitor',
    'timed',
    'CamoNet',
    'build_model',
    'LossWeights',
    'deep_supervision_loss',
    'MetricsConfig',
    'MetricsReport',
    'evaluate_dir',
    'Trainer',
    'train',
    'Predictor',
    'eval_cmd',
    'infer',
    'GradCheckReport',
    'run_gradcheck',
    'AblationResult',
    'run_ablation',
    'CLI',
    'get_cli',
    'CamoFlowCommands',
    'cli_main',
]
