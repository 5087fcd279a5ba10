"""
Network assembly

encoder -> MSFI (or PlainFusion) -> skip stack -> MSKM stack (or plain
blocks) -> coarse / fine / final decoders, plus aux heads on f3'' and f4''.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from camoflow.autograd.module import Module
from camoflow.autograd.tensor import Tensor
from camoflow.config import Config
from camoflow.exceptions import DimensionError
from camoflow.logging_config import get_logger
from camoflow.model.decoders import (
    AuxHeads,
    CoarseDecoder,
    FinalDecoder,
    MaskTriple,
    SpatialBroadcastDecoder,
)
from camoflow.model.encoder import PyramidEncoder, PyramidFeatures
from camoflow.model.fusion import MSFI, FusedFeatures, PlainFusion, SkipStack
from camoflow.model.selective import mskm_stack, plain_stack

logger = get_logger('camoflow.network')


@dataclass
class NetworkOutput:
    """Everything one forward pass produces"""
    masks: MaskTriple
    aux: List[Tuple[Tensor, int]]
    pyramid: PyramidFeatures
    fused: FusedFeatures
    skips: SkipStack
    extracted: Tuple[Tensor, ...]


class CamoNet(Module):
    """
    Coarse-to-fine camouflaged object detector

    Submodules (and parameter name prefixes): encoder, fusion, mskm or
    extract, coarse, sbd (absent when use_sbd is off), final, aux.
    """

    def __init__(self, cfg: Config, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        widths = tuple(cfg.widths)
        act = cfg.activation
        self.use_sbd = cfg.ablation.use_sbd

        self.encoder = PyramidEncoder(widths, cfg.latent_dim if self.use_sbd else None, act, rng)
        if cfg.ablation.use_msfi:
            self.fusion = MSFI(widths, act, rng)
        else:
            self.fusion = PlainFusion(widths, act, rng)
        if cfg.ablation.use_mskm:
            self.mskm = mskm_stack(widths, cfg.mskm_depth, cfg.mac_kinds, rng)
        else:
            self.extract = plain_stack(widths, cfg.mskm_depth, act, rng)
        self.coarse = CoarseDecoder(widths[1], cfg.decoder_width, act, rng)
        self.sbd = SpatialBroadcastDecoder(cfg.latent_dim, cfg.sbd_hidden, act, rng) if self.use_sbd else None
        self.final = FinalDecoder(
            widths, use_fine=self.use_sbd, fused_width=cfg.decoder_width,
            width=cfg.decoder_width, activation=act, rng=rng,
        )
        self.aux = AuxHeads(widths[2], widths[3], rng)

    @property
    def extractor(self) -> Module:
        return self.mskm if 'mskm' in self._modules else self.extract

    def forward(self, image: Tensor, trace: Optional[Dict[str, Tensor]] = None) -> NetworkOutput:
        """
        Run the full network

        Args:
            image: (N, 3, H, W) batch with H, W divisible by 32
            trace: Optional dict receiving the final decoder's concat

        Returns:
            NetworkOutput with coarse/final logits and the fine mask
        """
        if image.ndim != 4:
            raise DimensionError(f"forward: expected (N, 3, H, W) image, got {image.shape}")
        size = image.shape[2:]
        pyramid = self.encoder(image)
        fused, skips = self.fusion(pyramid)
        extracted = self.extractor(skips.levels())
        coarse = self.coarse(fused.f2pp, size)
        fine = self.sbd(pyramid.fx, size[0], size[1]) if self.sbd is not None else None
        final = self.final(extracted, fine, size, trace=trace)
        aux = self.aux(fused.f3pp, fused.f4pp)
        return NetworkOutput(
            masks=MaskTriple(coarse=coarse, fine=fine, final=final),
            aux=aux, pyramid=pyramid, fused=fused, skips=skips, extracted=extracted,
        )


def build_model(cfg: Config) -> CamoNet:
    """
    Validate the config and assemble a freshly initialised network

    Initialisation draws from default_rng(cfg.seed), so the same config
    always produces bit-identical parameters.

    Raises:
        ConfigurationError: Naming the invalid field
    """
    cfg.validate()
    model = CamoNet(cfg, np.random.default_rng(cfg.seed))
    model.bind_names()
    logger.info(
        f"Built model ({cfg.ablation.label()}): {model.num_parameters():,} parameters"
    )
    return model
