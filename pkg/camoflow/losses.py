"""
CamoFlow Supervision Losses

- structure_loss: BCE-with-logits + (1 - soft IoU), per image, averaged
- dda_loss: the same with both sums weighted by a boundary-difficulty map
  1 + lambda * |meanpool_k(target) - target|
- residual_target: |gt - sigmoid(coarse)|, detached, supervises the fine mask
- deep_supervision_loss: final + coarse + fine + aux_weight * aux
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from camoflow.autograd import functional as F
from camoflow.autograd.tensor import Tensor
from camoflow.exceptions import DimensionError, TargetRangeError
from camoflow.logging_config import get_logger
from camoflow.model.decoders import MaskTriple

logger = get_logger('camoflow.losses')

DDA_LAMBDA = 5.0
DDA_KERNEL = 31


@dataclass
class LossWeights:
    final: float = 1.0
    coarse: float = 1.0
    fine: float = 1.0
    aux: float = 0.5


@dataclass
class LossReport:
    """
    Component losses of one batch

    `total` is computed from the float components, so it equals their
    weighted sum exactly. `objective` is the differentiable counterpart.
    """
    final_loss: float
    coarse_loss: float
    fine_loss: float
    aux_loss: float
    total: float
    weights: LossWeights = field(default_factory=LossWeights)
    objective: Optional[Tensor] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, float]:
        return {
            'total': self.total,
            'final': self.final_loss,
            'coarse': self.coarse_loss,
            'fine': self.fine_loss,
            'aux': self.aux_loss,
        }


def _check_pair(logits: Tensor, target: Tensor, op: str) -> None:
    if logits.shape != target.shape:
        raise DimensionError(f"{op}: logits {logits.shape} and target {target.shape} differ")
    if logits.ndim != 4:
        raise DimensionError(f"{op}: expected (N, 1, H, W) logits, got {logits.shape}")
    data = target.data
    if not np.all(np.isfinite(data)) or data.min() < 0 or data.max() > 1:
        raise TargetRangeError(
            f"{op}: target values must lie in [0, 1], got range [{data.min()}, {data.max()}]"
        )


def weighted_structure_loss(logits: Tensor, target: Tensor, weight: np.ndarray) -> Tensor:
    """
    Weighted BCE + weighted (1 - IoU), averaged over the batch

    Per image n with p = sigmoid(logits):
        bce_n = sum(w * bce) / sum(w)
        iou_n = (sum(w*p*t) + 1) / (sum(w*p) + sum(w*t) - sum(w*p*t) + 1)
    """
    _check_pair(logits, target, 'structure_loss')
    axes = (1, 2, 3)
    w = Tensor(weight.astype(logits.dtype))
    t = Tensor(target.data.astype(logits.dtype))
    weight_sum = Tensor(w.data.sum(axis=axes))
    target_sum = Tensor((w.data * t.data).sum(axis=axes))

    bce = (F.bce_with_logits(logits, t) * w).sum(axis=axes) / weight_sum
    p = F.sigmoid(logits)
    inter = (p * t * w).sum(axis=axes)
    union = (p * w).sum(axis=axes) + target_sum - inter
    iou = (inter + 1.0) / (union + 1.0)
    return (bce + (1.0 - iou)).mean()


def structure_loss(logits: Tensor, target: Tensor) -> Tensor:
    """
    Mean BCE-with-logits plus (1 - soft IoU)

    Args:
        logits: (N, 1, H, W) pre-sigmoid scores
        target: Same shape, values in [0, 1]

    Returns:
        Scalar Tensor

    Raises:
        DimensionError: If shapes differ
        TargetRangeError: If the target leaves [0, 1]
    """
    return weighted_structure_loss(logits, target, np.ones(target.shape))


def dda_kernel_size(h: int, w: int, kernel: int = DDA_KERNEL) -> int:
    """`kernel`, or the largest odd size <= min(h, w) on small maps"""
    side = min(h, w)
    if side >= kernel:
        return kernel
    return side if side % 2 else side - 1


def local_mean(target: np.ndarray, k: int) -> np.ndarray:
    """
    Centered k x k box mean over (N, C, H, W), divided by the in-bounds count

    Uses integral images; a uniform input is returned unchanged.
    """
    n, c, h, w = target.shape
    r = k // 2
    padded = np.zeros((n, c, h + 1, w + 1), dtype=np.float64)
    padded[:, :, 1:, 1:] = np.cumsum(np.cumsum(target.astype(np.float64), axis=2), axis=3)
    y0 = np.clip(np.arange(h) - r, 0, h)
    y1 = np.clip(np.arange(h) + r + 1, 0, h)
    x0 = np.clip(np.arange(w) - r, 0, w)
    x1 = np.clip(np.arange(w) + r + 1, 0, w)
    box = (
        padded[:, :, y1[:, None], x1[None, :]]
        - padded[:, :, y0[:, None], x1[None, :]]
        - padded[:, :, y1[:, None], x0[None, :]]
        + padded[:, :, y0[:, None], x0[None, :]]
    )
    count = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return box / count


def difficulty_weight(target: np.ndarray, lam: float = DDA_LAMBDA, kernel: int = DDA_KERNEL) -> np.ndarray:
    """1 + lam * |meanpool_k(target) - target|"""
    k = dda_kernel_size(target.shape[2], target.shape[3], kernel)
    return 1.0 + lam * np.abs(local_mean(target, k) - target)


def dda_loss(logits: Tensor, target: Tensor, lam: float = DDA_LAMBDA, kernel: int = DDA_KERNEL) -> Tensor:
    """
    Difficulty-weighted structure loss

    Pixels near target boundaries get weights above 1; on a uniform target
    every weight is exactly 1 and the result equals structure_loss.
    """
    _check_pair(logits, target, 'dda_loss')
    return weighted_structure_loss(logits, target, difficulty_weight(target.data, lam, kernel))


def residual_target(gt: Tensor, coarse_logits: Tensor) -> Tensor:
    """|gt - sigmoid(coarse_logits)| as a constant (no gradient path to the coarse head)"""
    if gt.shape != coarse_logits.shape:
        raise DimensionError(f"residual_target: gt {gt.shape} vs coarse {coarse_logits.shape}")
    residual = np.abs(gt.data.astype(coarse_logits.dtype) - expit(coarse_logits.data))
    return Tensor(residual.astype(coarse_logits.dtype))


def aux_targets(gt: Tensor, aux: Sequence[Tuple[Tensor, int]]) -> Sequence[Tensor]:
    """Ground truth mean-pooled to each aux head's stride"""
    return [F.mean_pool(gt, scale) for _, scale in aux]


def deep_supervision_loss(
    masks: MaskTriple,
    aux: Sequence[Tuple[Tensor, int]],
    gt: Tensor,
    weights: Optional[LossWeights] = None,
    lam: float = DDA_LAMBDA,
    kernel: int = DDA_KERNEL,
    fine_target: Optional[Tensor] = None,
) -> LossReport:
    """
    Total training loss across all supervised outputs

    Args:
        masks: Coarse/final logits and the fine mask (None without SBD)
        aux: (logits, stride) per aux head
        gt: Binary ground truth at image resolution
        weights: Per-term weights (aux defaults to 0.5)
        fine_target: Fixed fine-mask target instead of residual_target(gt, coarse)

    Returns:
        LossReport with float components and the differentiable objective
    """
    weights = weights or LossWeights()
    gt = Tensor(gt.data.astype(masks.final.dtype))

    final_t = dda_loss(masks.final, gt, lam, kernel)
    coarse_t = dda_loss(masks.coarse, gt, lam, kernel)
    objective = final_t * weights.final + coarse_t * weights.coarse
    fine_value = 0.0
    if masks.fine is not None:
        target = fine_target if fine_target is not None else residual_target(gt, masks.coarse)
        fine_t = dda_loss(F.logit(masks.fine), target, lam, kernel)
        objective = objective + fine_t * weights.fine
        fine_value = fine_t.item()

    aux_value = 0.0
    if aux:
        aux_t = None
        for (logits, _), target in zip(aux, aux_targets(gt, aux)):
            term = structure_loss(logits, target)
            aux_t = term if aux_t is None else aux_t + term
        objective = objective + aux_t * weights.aux
        aux_value = aux_t.item()

    final_value = final_t.item()
    coarse_value = coarse_t.item()
    total = (
        (weights.final * final_value + weights.coarse * coarse_value)
        + weights.fine * fine_value
    ) + weights.aux * aux_value
    return LossReport(
        final_loss=final_value,
        coarse_loss=coarse_value,
        fine_loss=fine_value,
        aux_loss=aux_value,
        total=total,
        weights=weights,
        objective=objective,
    )
