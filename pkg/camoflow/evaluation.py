"""
CamoFlow Inference and Evaluation

- Predictor: resize to the model input, forward, sigmoid, resize back
- eval_cmd: predict every manifest sample, write masks and report.json
- infer: predict one image, optionally with the coarse and fine masks
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from camoflow.autograd.tensor import Tensor, no_grad
from camoflow.checkpoint import load_into
from camoflow.config import Config, resolve_threads
from camoflow.data.dataset import Manifest, load_image, load_entry, resize_bilinear
from camoflow.data.pnm import load_mask, quantize, save_mask
from camoflow.exceptions import ConfigurationError
from camoflow.logging_config import get_logger, log_operation
from camoflow.metrics import MetricsConfig, MetricsReport, evaluate_pairs
from camoflow.model.network import CamoNet, build_model
from camoflow.performance import get_monitor
from camoflow.validators import InputValidator

logger = get_logger('camoflow.evaluation')

PathLike = Union[str, Path]
REPORT_FILE = 'report.json'


@dataclass
class Prediction:
    """Probability maps at the original image size; fine is None without SBD"""
    final: np.ndarray
    coarse: np.ndarray
    fine: Optional[np.ndarray]


def load_model(cfg: Config, checkpoint: PathLike) -> CamoNet:
    """
    Build the configured architecture and fill it from a checkpoint

    Raises:
        DataIOError: If the checkpoint is missing
        FormatError: Naming the first parameter that does not fit
    """
    path = InputValidator.validate_existing_file(checkpoint, 'checkpoint')
    model = build_model(cfg)
    load_into(model, path)
    return model


class Predictor:
    """
    Deterministic single-image inference

    Example:
        >>> predictor = Predictor(model, input_size=384)
        >>> prediction = predictor.predict_file('frog.ppm')
    """

    def __init__(self, model: CamoNet, input_size: int):
        self.model = model
        self.input_size = input_size
        self.monitor = get_monitor()

    def predict(self, image: Tensor, original_size: Tuple[int, int]) -> Prediction:
        """
        Args:
            image: (1, 3, S, S) image already at the input size
            original_size: (H, W) to resize the maps back to
        """
        if image.shape[0] != 1 or image.shape[2:] != (self.input_size, self.input_size):
            raise ConfigurationError(
                f"Predictor expects a (1, 3, {self.input_size}, {self.input_size}) image, got {image.shape}"
            )
        with self.monitor.measure('inference', images=1), no_grad():
            masks = self.model(image).masks

        def back(values: np.ndarray) -> np.ndarray:
            plane = values.astype(np.float64)[0, 0]
            return np.clip(resize_bilinear(plane, original_size), 0.0, 1.0)

        return Prediction(
            final=back(expit(masks.final.data)),
            coarse=back(expit(masks.coarse.data)),
            fine=back(masks.fine.data) if masks.fine is not None else None,
        )

    def predict_file(self, image_path: PathLike) -> Prediction:
        image, original = load_image(image_path, self.input_size)
        return self.predict(image, original)


def eval_cmd(
    cfg: Config,
    checkpoint: PathLike,
    manifest: Manifest,
    out_dir: PathLike,
    model: Optional[CamoNet] = None,
) -> MetricsReport:
    """
    Predict every sample, write masks/<id>.pgm and report.json

    Metrics are computed on the 8-bit masks as written, against the ground
    truth at its original resolution, so they match a later evaluate_dir of
    the same folders.

    Returns:
        MetricsReport in manifest order
    """
    if not len(manifest):
        raise ConfigurationError(f"Manifest for split '{manifest.split}' is empty")
    out_dir = InputValidator.validate_output_dir(out_dir)
    mask_dir = InputValidator.validate_output_dir(out_dir / 'masks')
    model = model if model is not None else load_model(cfg, checkpoint)
    predictor = Predictor(model, cfg.input_size)

    pairs = []
    with log_operation(logger, f"eval {len(manifest)} samples"):
        for entry in manifest:
            sample = load_entry(entry, cfg.input_size)
            prediction = predictor.predict(sample.image, sample.original_size)
            save_mask(prediction.final, mask_dir / f"{entry.id}.pgm")
            stored = quantize(prediction.final).astype(np.float64) / 255.0
            pairs.append((entry.id, stored, load_mask(entry.mask)))
        metrics_cfg = MetricsConfig(beta_sq=cfg.beta_sq, s_alpha_weight=cfg.s_alpha_weight)
        report = evaluate_pairs(pairs, metrics_cfg, threads=resolve_threads(cfg))
        report.save(out_dir / REPORT_FILE)
    logger.info(
        f"Eval: MAE={report.mae:.6f} S={report.s_alpha:.6f} E={report.e_xi:.6f} F={report.f_beta:.6f}"
    )
    return report


def intermediate_paths(out_path: PathLike) -> Tuple[Path, Path]:
    """x.pgm -> (x.coarse.pgm, x.fine.pgm)"""
    out_path = Path(out_path)
    stem = out_path.name[:-len('.pgm')] if out_path.name.endswith('.pgm') else out_path.name
    return out_path.with_name(f"{stem}.coarse.pgm"), out_path.with_name(f"{stem}.fine.pgm")


def infer(
    cfg: Config,
    checkpoint: PathLike,
    image_path: PathLike,
    out_path: PathLike,
    emit_intermediate: bool = False,
    model: Optional[CamoNet] = None,
) -> List[Path]:
    """
    Write the final mask for one image (and optionally the coarse/fine masks)

    Returns:
        Paths written, final mask first
    """
    model = model if model is not None else load_model(cfg, checkpoint)
    out_path = Path(out_path)
    with log_operation(logger, f"infer {image_path}"):
        prediction = Predictor(model, cfg.input_size).predict_file(image_path)
        save_mask(prediction.final, out_path)
        written = [out_path]
        if emit_intermediate:
            coarse_path, fine_path = intermediate_paths(out_path)
            save_mask(prediction.coarse, coarse_path)
            written.append(coarse_path)
            if prediction.fine is not None:
                save_mask(prediction.fine, fine_path)
                written.append(fine_path)
            else:
                logger.warning("Model has no fine-mask path; skipping the .fine.pgm output")
    return written
