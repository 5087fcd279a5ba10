"""
CamoFlow Gradient Diagnostics

Finite-difference verification of every differentiable component:
- tensor-core primitives checked directly with grad_check
- each model component checked on its own parameters, with its inputs
  frozen at the values of one 64x64 forward pass
- the losses checked with respect to their logits
- the assembled network checked end to end through deep_supervision_loss

Everything runs in double precision. A component fails when its worst
relative error reaches the threshold (1e-3 by default).
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from camoflow.autograd import functional as F
from camoflow.autograd.gradcheck import check_parameters, grad_check
from camoflow.autograd.module import Parameter
from camoflow.autograd.tensor import Tensor, no_grad, precision
from camoflow.config import Config
from camoflow.exceptions import ConfigurationError
from camoflow.logging_config import get_logger, log_operation
from camoflow.losses import (
    LossWeights,
    dda_loss,
    deep_supervision_loss,
    residual_target,
    structure_loss,
)
from camoflow.model.decoders import MaskTriple
from camoflow.model.encoder import PyramidFeatures
from camoflow.model.fusion import MSFI
from camoflow.model.network import CamoNet, NetworkOutput, build_model

logger = get_logger('camoflow.diagnostics')

THRESHOLD = 1e-3
CHECK_SIZE = 64
FD_EPS = 1e-4
MIN_GRADIENT = 1e-6


@dataclass
class GradCheckRow:
    """Worst relative error of one component over all seeds"""
    module: str
    worst: float = 0.0
    checked: int = 0

    def passed(self, threshold: float = THRESHOLD) -> bool:
        return self.worst < threshold


@dataclass
class GradCheckReport:
    rows: List[GradCheckRow] = field(default_factory=list)
    seeds: List[int] = field(default_factory=list)
    threshold: float = THRESHOLD

    @property
    def passed(self) -> bool:
        return all(row.passed(self.threshold) for row in self.rows)

    @property
    def worst(self) -> float:
        return max((row.worst for row in self.rows), default=0.0)

    def failures(self) -> List[GradCheckRow]:
        return [row for row in self.rows if not row.passed(self.threshold)]

    def to_dict(self) -> Dict[str, object]:
        return {
            'threshold': self.threshold,
            'seeds': list(self.seeds),
            'passed': self.passed,
            'modules': {row.module: {'worst': row.worst, 'checked': row.checked} for row in self.rows},
        }


# ==========================================================================
# Random projections
# ==========================================================================

class _Projection:
    """
    Scalar summary sum_i <t_i, r_i> of several tensors

    The random directions r_i are drawn on first use and then fixed, so the
    projection is the same function at every perturbed point.
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.directions: Dict[int, np.ndarray] = {}

    def __call__(self, tensors: Sequence[Tensor]) -> Tensor:
        total: Optional[Tensor] = None
        for index, t in enumerate(tensors):
            if index not in self.directions:
                self.directions[index] = self.rng.standard_normal(t.shape)
            term = (t * Tensor(self.directions[index])).sum()
            total = term if total is None else total + term
        return total


def _detach(t: Tensor) -> Tensor:
    return Tensor(np.array(t.data, dtype=np.float64))


def _spaced(rng: np.random.Generator, shape: Tuple[int, ...], step: float = 0.05) -> np.ndarray:
    """Distinct values at least `step` apart and never within step/2 of zero"""
    size = int(np.prod(shape))
    return ((rng.permutation(size) - size / 2 + 0.5) * step).reshape(shape)


# ==========================================================================
# Primitive battery
# ==========================================================================

def _primitive_cases(rng: np.random.Generator) -> List[Tuple[str, Callable[[Tensor], Tensor], np.ndarray]]:
    x = rng.standard_normal((2, 4, 6, 6))
    kernel = rng.standard_normal((3, 4, 3, 3))
    bias = rng.standard_normal(3)
    gate = rng.standard_normal((2, 1, 6, 6))
    positive = rng.uniform(0.5, 2.0, size=(2, 4, 6, 6))
    target = rng.uniform(0.0, 1.0, size=(2, 4, 6, 6))
    spaced = _spaced(rng, (2, 4, 6, 6))
    weight = rng.standard_normal((3, 5))
    projection = rng.standard_normal((5, 4))

    def project() -> _Projection:
        return _Projection(np.random.default_rng(rng.integers(2 ** 32)))

    cases = [
        ('conv2d', lambda t, p=project(): p([F.conv2d(t, Tensor(kernel), Tensor(bias), 1, 1, 1)]), x),
        ('conv2d-kernel', lambda t, p=project(): p([F.conv2d(Tensor(x), t, None, stride=2, padding=2, dilation=2)]), kernel),
        ('resize2-up', lambda t, p=project(): p([F.resize2(t, 'up')]), x),
        ('resize2-down', lambda t, p=project(): p([F.resize2(t, 'down')]), x),
        ('resize', lambda t, p=project(): p([F.resize(t, (5, 9))]), x),
        ('mean_pool', lambda t, p=project(): p([F.mean_pool(t, 3)]), x),
        ('concat-slice', lambda t, p=project(): p([F.channel_slice(F.concat_channels([t, t * 2.0]), 2, 6)]), x),
        ('channel-mean', lambda t, p=project(): p([F.channel_reduce(t, 'mean')]), x),
        ('channel-max', lambda t, p=project(): p([F.channel_reduce(t, 'max')]), spaced),
        ('maxpool2', lambda t, p=project(): p([F.maxpool2(t)]), spaced),
        ('eltwise-mul', lambda t, p=project(): p([F.eltwise(t, Tensor(gate), 'mul')]), x),
        ('eltwise-sub', lambda t, p=project(): p([F.eltwise(t, Tensor(gate), 'sub')]), x),
        ('eltwise-sub-broadcast', lambda t, p=project(): p([F.eltwise(Tensor(x), t, 'sub')]), gate),
        ('div', lambda t, p=project(): p([Tensor(x) / t]), positive),
        ('reductions', lambda t, p=project(): p([t.sum(axis=1), t.mean(axis=(2, 3), keepdims=True)]), x),
        ('linear', lambda t, p=project(): p([F.linear(t, Tensor(weight), Tensor(bias))]), x[:, 0, 0, :5]),
        ('global_pool_project', lambda t, p=project(): p([F.global_pool_project(t, Tensor(projection))]), x),
        ('broadcast_latent', lambda t, p=project(): p([F.broadcast_latent(t, 3, 4)]), x[:, :, 0, 0]),
        ('pad-crop', lambda t, p=project(): p([F.crop2d(F.pad_to_multiple(t, 4), 7, 5)]), x),
        ('clamp', lambda t, p=project(): p([F.clamp(t, -1.0, 1.0)]), spaced),
        ('log', lambda t, p=project(): p([F.log(t)]), positive),
        ('logit', lambda t, p=project(): p([F.logit(t)]), target * 0.9 + 0.05),
        ('bce_with_logits', lambda t: F.bce_with_logits(t, Tensor(target)).mean(), x),
    ]
    for kind in F.ACTIVATIONS:
        cases.append((f"activation-{kind}", lambda t, p=project(), k=kind: p([F.activation(t, k)]), spaced))
    return cases


def check_primitives(rng: np.random.Generator, eps: float = FD_EPS) -> Tuple[float, int]:
    """
    Run grad_check over every tensor-core primitive

    Returns:
        (worst relative error, number of primitives checked)
    """
    worst = 0.0
    cases = _primitive_cases(rng)
    for name, fn, point in cases:
        error = grad_check(fn, Tensor(point), eps=eps)
        logger.debug(f"grad_check {name}: {error:.3e}")
        worst = max(worst, error)
    return worst, len(cases)


def check_losses(rng: np.random.Generator, eps: float = FD_EPS, size: int = CHECK_SIZE) -> Tuple[float, int]:
    """grad_check of structure_loss, dda_loss and deep_supervision_loss w.r.t. logits"""
    gt = Tensor(_disk_mask(size, rng)[None, None])
    logits = rng.standard_normal((1, 1, size, size))
    coarse = Tensor(rng.standard_normal((1, 1, size, size)))
    count = 12

    def composite(t: Tensor) -> Tensor:
        masks = MaskTriple(coarse=coarse, fine=F.sigmoid(t * 0.5), final=t)
        aux = [(F.mean_pool(t, 16), 16), (F.mean_pool(t, 32), 32)]
        return deep_supervision_loss(masks, aux, gt).objective

    worst = max(
        grad_check(lambda t: structure_loss(t, gt), Tensor(logits), eps, count, rng),
        grad_check(lambda t: dda_loss(t, gt), Tensor(logits), eps, count, rng),
        grad_check(composite, Tensor(logits), eps, count, rng),
    )
    return worst, 3 * count


# ==========================================================================
# Model components
# ==========================================================================

def _disk_mask(size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size]
    cy, cx = rng.uniform(0.35, 0.65, size=2) * size
    radius = rng.uniform(0.2, 0.3) * size
    return ((yy - cy) ** 2 + (xx - cx) ** 2 <= radius ** 2).astype(np.float64)


def _component_checks(
    model: CamoNet,
    image: Tensor,
    gt: Tensor,
    base: NetworkOutput,
    project: Callable[[], _Projection],
) -> List[Tuple[str, List[Parameter], Callable[[], Tensor]]]:
    """(module name, parameters, objective) for every component of the model"""
    size = image.shape[2:]
    pyramid = PyramidFeatures(
        *[_detach(t) for t in base.pyramid.levels()],
        fx=_detach(base.pyramid.fx) if base.pyramid.fx is not None else None,
    )
    fused = {name: _detach(getattr(base.fused, name)) for name in ('f2pp', 'f3pp', 'f4pp')}
    levels = [_detach(t) for t in base.skips.levels()]
    extracted = [_detach(t) for t in base.extracted]
    fine = _detach(base.masks.fine) if base.masks.fine is not None else None

    def fusion_outputs() -> Tensor:
        out, skips = model.fusion(pyramid)
        return p_fusion([out.f2p, out.f3p, out.f4p, out.f2pp, out.f3pp, out.f4pp, *skips.levels()])

    p_encoder, p_fusion, p_extract = project(), project(), project()
    p_coarse, p_final, p_aux = project(), project(), project()

    def encoder_outputs() -> Tensor:
        out = model.encoder(image)
        outputs = out.levels() if out.fx is None else [*out.levels(), out.fx]
        return p_encoder(list(outputs))

    checks = [
        ('encoder-stub', model.encoder.parameters(), encoder_outputs),
        ('msfi' if isinstance(model.fusion, MSFI) else 'plain-fusion', model.fusion.parameters(), fusion_outputs),
    ]

    if 'mskm' in model._modules:
        block = model.mskm[0][0]
        p_mac = project()
        checks.append((
            'mac', block.mac_a.parameters() + block.mac_n.parameters(),
            lambda: p_mac([block.mac_a(levels[0]), block.mac_n(levels[0])]),
        ))
        checks.append(('mskm', model.mskm.parameters(), lambda: p_extract(model.mskm(levels))))
    else:
        checks.append(('plain-extract', model.extract.parameters(), lambda: p_extract(model.extract(levels))))

    checks.append((
        'coarse-decoder', model.coarse.parameters(),
        lambda: p_coarse([model.coarse(fused['f2pp'], size)]),
    ))
    if model.sbd is not None:
        p_sbd = project()
        fx = pyramid.fx
        checks.append(('sbd', model.sbd.parameters(), lambda: p_sbd([model.sbd(fx, size[0], size[1])])))
    checks.append((
        'final-decoder', model.final.parameters(),
        lambda: p_final([model.final(extracted, fine, size)]),
    ))
    checks.append((
        'aux', model.aux.parameters(),
        lambda: p_aux([logits for logits, _ in model.aux(fused['f3pp'], fused['f4pp'])]),
    ))

    # residual_target is detached, so it stays fixed at the base point.
    frozen = residual_target(gt, base.masks.coarse) if base.masks.fine is not None else None

    def network_loss() -> Tensor:
        out = model(image)
        return deep_supervision_loss(out.masks, out.aux, gt, LossWeights(), fine_target=frozen).objective

    checks.append(('network', model.parameters(), network_loss))
    return checks


def module_names(cfg: Config) -> List[str]:
    """Report rows for a configuration, in check order"""
    names = ['tensor-core', 'encoder-stub']
    names.append('msfi' if cfg.ablation.use_msfi else 'plain-fusion')
    names.extend(['mac', 'mskm'] if cfg.ablation.use_mskm else ['plain-extract'])
    names.append('coarse-decoder')
    if cfg.ablation.use_sbd:
        names.append('sbd')
    names.extend(['final-decoder', 'aux', 'losses', 'network'])
    return names


def check_seed(cfg: Config, seed: int, samples: int = 6, eps: float = FD_EPS) -> Dict[str, Tuple[float, int]]:
    """
    One seed of the full diagnostic

    Returns:
        module name -> (worst relative error, coordinates checked)
    """
    cfg = cfg.with_overrides(seed=seed)
    results: Dict[str, Tuple[float, int]] = {}
    with precision(np.float64):
        rng = np.random.default_rng([seed, 0])
        results['tensor-core'] = check_primitives(rng, eps)

        model = build_model(cfg).astype(np.float64)
        image = Tensor(rng.uniform(0.0, 1.0, size=(1, 3, CHECK_SIZE, CHECK_SIZE)))
        gt = Tensor(_disk_mask(CHECK_SIZE, rng)[None, None])
        with no_grad():
            base = model(image)

        projection_seeds = np.random.default_rng([seed, 1])

        def project() -> _Projection:
            return _Projection(np.random.default_rng(projection_seeds.integers(2 ** 32)))

        checks = _component_checks(model, image, gt, base, project)
        for index, (name, params, objective) in enumerate(checks):
            if name == 'network':
                results['losses'] = check_losses(np.random.default_rng([seed, 2]), eps)
            results[name] = check_parameters(
                objective, params, eps=eps, samples=samples,
                rng=np.random.default_rng([seed, 3, index]), min_gradient=MIN_GRADIENT,
            )
            logger.debug(f"seed {seed} {name}: {results[name][0]:.3e} over {results[name][1]} coordinates")
    return results


def run_gradcheck(
    cfg: Config,
    seeds: int = 1,
    samples: int = 6,
    threshold: float = THRESHOLD,
    eps: float = FD_EPS,
) -> GradCheckReport:
    """
    Gradient check of every component over consecutive seeds

    Args:
        cfg: Architecture to check (seed is the first seed used)
        seeds: Number of consecutive seeds starting at cfg.seed
        samples: Parameter coordinates checked per component and seed
        threshold: Relative error at which a component fails

    Returns:
        GradCheckReport with one row per component
    """
    if seeds < 1:
        raise ConfigurationError(f"seeds must be >= 1, got {seeds}")
    cfg.validate()
    names = module_names(cfg)
    rows = {name: GradCheckRow(name) for name in names}
    used = [cfg.seed + offset for offset in range(seeds)]

    with log_operation(logger, f"gradcheck over seeds {used}"):
        for seed in used:
            for name, (worst, checked) in check_seed(cfg, seed, samples, eps).items():
                row = rows[name]
                row.worst = max(row.worst, worst)
                row.checked += checked

    report = GradCheckReport(rows=[rows[name] for name in names], seeds=used, threshold=threshold)
    for row in report.failures():
        logger.error(f"Gradient check failed for {row.module}: worst relative error {row.worst:.3e}")
    return report
