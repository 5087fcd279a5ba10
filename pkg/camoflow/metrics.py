"""
CamoFlow Evaluation Metrics

Camouflaged-object measures on single-channel maps:
- mae: mean absolute error
- adaptive_fbeta: F-measure at the adaptive threshold min(2 * mean, 1)
- s_measure: structure measure (object + region similarity)
- e_measure_adaptive: enhanced alignment measure at the adaptive threshold
- evaluate_dir / evaluate_pairs: per-image quadruples plus their means
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from camoflow.exceptions import DataIOError, DimensionError
from camoflow.logging_config import get_logger
from camoflow.storage import atomic_write_text

logger = get_logger('camoflow.metrics')

EPS = np.spacing(1)
E_MEASURE_EPS = 1e-8
PathLike = Union[str, Path]


@dataclass
class MetricsConfig:
    beta_sq: float = 0.3
    s_alpha_weight: float = 0.5


@dataclass
class ImageMetrics:
    id: str
    mae: float
    s_alpha: float
    e_xi: float
    f_beta: float


@dataclass
class MetricsReport:
    """Aggregates are arithmetic means of the per-image values"""
    mae: float
    s_alpha: float
    e_xi: float
    f_beta: float
    per_image: List[ImageMetrics] = field(default_factory=list)

    @classmethod
    def from_images(cls, per_image: Sequence[ImageMetrics]) -> "MetricsReport":
        if not per_image:
            raise DataIOError("Cannot build a metrics report from zero images")
        count = len(per_image)
        return cls(
            mae=sum(m.mae for m in per_image) / count,
            s_alpha=sum(m.s_alpha for m in per_image) / count,
            e_xi=sum(m.e_xi for m in per_image) / count,
            f_beta=sum(m.f_beta for m in per_image) / count,
            per_image=list(per_image),
        )

    def aggregate(self) -> dict:
        return {'mae': self.mae, 's_alpha': self.s_alpha, 'e_xi': self.e_xi, 'f_beta': self.f_beta}

    def to_dict(self) -> dict:
        return {'aggregate': self.aggregate(), 'per_image': [asdict(m) for m in self.per_image]}

    def to_json(self) -> str:
        """JSON with every real printed in 6-decimal fixed notation"""
        def values(record: dict) -> str:
            return ', '.join(f'"{key}": {record[key]:.6f}' for key in ('mae', 's_alpha', 'e_xi', 'f_beta'))

        lines = ['{', f'  "aggregate": {{{values(self.aggregate())}}},', '  "per_image": [']
        for index, image in enumerate(self.per_image):
            comma = ',' if index < len(self.per_image) - 1 else ''
            image_id = image.id.replace('\\', '\\\\').replace('"', '\\"')
            lines.append(f'    {{"id": "{image_id}", {values(asdict(image))}}}{comma}')
        lines.extend(['  ]', '}'])
        return '\n'.join(lines) + '\n'

    def save(self, path: PathLike) -> None:
        atomic_write_text(Path(path), self.to_json())


# ==========================================================================
# Per-image measures
# ==========================================================================

def _prepare(pred: np.ndarray, gt: np.ndarray, op: str) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.squeeze(np.asarray(pred, dtype=np.float64))
    gt = np.squeeze(np.asarray(gt, dtype=np.float64))
    if pred.shape != gt.shape:
        raise DimensionError(f"{op}: prediction {pred.shape} and ground truth {gt.shape} differ")
    return pred, gt > 0.5


def adaptive_binarize(pred: np.ndarray) -> np.ndarray:
    """pred >= min(2 * mean, 1), restricted to positive values"""
    threshold = min(2.0 * float(pred.mean()), 1.0)
    return (pred >= threshold) & (pred > 0)


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """
    Mean absolute error

    Raises:
        DimensionError: If shapes differ
    """
    pred, gt = _prepare(pred, gt, 'mae')
    return float(np.mean(np.abs(pred - gt)))


def adaptive_fbeta(pred: np.ndarray, gt: np.ndarray, cfg: Optional[MetricsConfig] = None) -> float:
    """F = (1 + b2) P R / (b2 P + R) at the adaptive threshold; 0 if undefined"""
    cfg = cfg or MetricsConfig()
    pred, gt = _prepare(pred, gt, 'adaptive_fbeta')
    binary = adaptive_binarize(pred)
    tp = float(np.count_nonzero(binary & gt))
    if tp == 0:
        return 0.0
    precision = tp / np.count_nonzero(binary)
    recall = tp / np.count_nonzero(gt)
    denominator = cfg.beta_sq * precision + recall
    if denominator == 0:
        return 0.0
    return float((1 + cfg.beta_sq) * precision * recall / denominator)


def _s_object(pred: np.ndarray, gt: np.ndarray) -> float:
    values = pred[gt]
    if values.size == 0:
        return 0.0
    x = float(values.mean())
    sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2 * x / (x * x + 1 + sigma + EPS)


def _object_score(pred: np.ndarray, gt: np.ndarray) -> float:
    u = float(gt.mean())
    fg = np.where(gt, pred, 0.0)
    bg = np.where(~gt, 1.0 - pred, 0.0)
    return u * _s_object(fg, gt) + (1 - u) * _s_object(bg, ~gt)


def _centroid(gt: np.ndarray) -> Tuple[int, int]:
    """1-based (x, y) split point: rounded mean foreground position + 1"""
    h, w = gt.shape
    if not gt.any():
        return int(np.round(w / 2)), int(np.round(h / 2))
    y, x = np.argwhere(gt).mean(axis=0).round()
    return int(x) + 1, int(y) + 1


def _ssim(pred: np.ndarray, gt: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x = pred.mean()
    y = gt.mean()
    dof = max(n - 1, 1)
    sigma_x = np.sum((pred - x) ** 2) / dof
    sigma_y = np.sum((gt - y) ** 2) / dof
    sigma_xy = np.sum((pred - x) * (gt - y)) / dof
    alpha = 4 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0:
        return float(alpha / (beta + EPS))
    if beta == 0:
        return 1.0
    return 0.0


def _region_score(pred: np.ndarray, gt: np.ndarray) -> float:
    h, w = gt.shape
    x, y = _centroid(gt)
    area = h * w
    gtf = gt.astype(np.float64)
    quadrants = (
        (slice(0, y), slice(0, x)),
        (slice(0, y), slice(x, w)),
        (slice(y, h), slice(0, x)),
        (slice(y, h), slice(x, w)),
    )
    w1 = x * y / area
    w2 = y * (w - x) / area
    w3 = (h - y) * x / area
    weights = (w1, w2, w3, 1 - w1 - w2 - w3)
    return sum(
        weight * _ssim(pred[rows, cols], gtf[rows, cols])
        for weight, (rows, cols) in zip(weights, quadrants)
    )


def s_measure(pred: np.ndarray, gt: np.ndarray, cfg: Optional[MetricsConfig] = None) -> float:
    """
    Structure measure alpha * S_object + (1 - alpha) * S_region

    Degenerate ground truth: all background gives 1 - mean(pred), all
    foreground gives mean(pred).
    """
    cfg = cfg or MetricsConfig()
    pred, gt = _prepare(pred, gt, 's_measure')
    y = gt.mean()
    if y == 0:
        return float(1 - pred.mean())
    if y == 1:
        return float(pred.mean())
    alpha = cfg.s_alpha_weight
    score = alpha * _object_score(pred, gt) + (1 - alpha) * _region_score(pred, gt)
    return float(np.clip(score, 0.0, 1.0))


def e_measure_adaptive(pred: np.ndarray, gt: np.ndarray) -> float:
    """
    Mean enhanced alignment at the adaptive threshold

    Degenerate ground truth: all background gives 1 - mean(binary pred),
    all foreground gives mean(binary pred).
    """
    pred, gt = _prepare(pred, gt, 'e_measure_adaptive')
    binary = adaptive_binarize(pred).astype(np.float64)
    gtf = gt.astype(np.float64)
    y = gtf.mean()
    if y == 0:
        return float(1 - binary.mean())
    if y == 1:
        return float(binary.mean())
    phi_g = gtf - y
    phi_p = binary - binary.mean()
    align = 2 * phi_g * phi_p / (phi_g ** 2 + phi_p ** 2 + E_MEASURE_EPS)
    return float(np.mean((align + 1) ** 2 / 4))


def image_metrics(image_id: str, pred: np.ndarray, gt: np.ndarray, cfg: Optional[MetricsConfig] = None) -> ImageMetrics:
    cfg = cfg or MetricsConfig()
    try:
        return ImageMetrics(
            id=image_id,
            mae=mae(pred, gt),
            s_alpha=s_measure(pred, gt, cfg),
            e_xi=e_measure_adaptive(pred, gt),
            f_beta=adaptive_fbeta(pred, gt, cfg),
        )
    except DimensionError as e:
        raise DimensionError(f"{image_id}: {e}")


# ==========================================================================
# Collections
# ==========================================================================

def evaluate_pairs(
    pairs: Iterable[Tuple[str, np.ndarray, np.ndarray]],
    cfg: Optional[MetricsConfig] = None,
    threads: int = 1,
) -> MetricsReport:
    """
    Score (id, pred, gt) triples; the report keeps the input order

    Args:
        pairs: Triples with pred in [0, 1] and binary gt
        threads: Worker threads for the per-image computations
    """
    pairs = list(pairs)
    cfg = cfg or MetricsConfig()
    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(lambda p: image_metrics(p[0], p[1], p[2], cfg), pairs))
    else:
        per_image = [image_metrics(image_id, pred, gt, cfg) for image_id, pred, gt in pairs]
    return MetricsReport.from_images(per_image)


def evaluate_dir(
    pred_dir: PathLike,
    gt_dir: PathLike,
    cfg: Optional[MetricsConfig] = None,
    threads: Optional[int] = None,
) -> MetricsReport:
    """
    Score every ground-truth PGM in gt_dir against the same-named file in pred_dir

    Files are visited in lexicographic name order. Predictions are read as
    value / maxval, ground truths binarized at half of maxval.

    Raises:
        DataIOError: If gt_dir holds no masks or predictions are missing (all names listed)
        DimensionError: If a pair differs in size (naming the file)
    """
    from camoflow.config import resolve_threads
    from camoflow.data.pnm import load_mask

    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    names = sorted(path.name for path in gt_dir.glob('*.pgm'))
    if not names:
        raise DataIOError(f"No ground-truth masks (*.pgm) in {gt_dir}")
    missing = [name for name in names if not (pred_dir / name).is_file()]
    if missing:
        raise DataIOError(f"Missing predictions in {pred_dir}: {', '.join(missing)}")

    workers = threads if threads is not None else resolve_threads()

    def load(name: str) -> Tuple[str, np.ndarray, np.ndarray]:
        return Path(name).stem, load_mask(pred_dir / name, binarize=False), load_mask(gt_dir / name)

    logger.info(f"Evaluating {len(names)} masks from {pred_dir} with {workers} threads")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        pairs = list(pool.map(load, names))
    return evaluate_pairs(pairs, cfg, threads=workers)
