"""
CamoFlow network

Encoder stub, multi-scale fusion, selective kernel stack and the three
mask decoders, assembled by build_model().
"""

from camoflow.model.decoders import (
    AuxHeads,
    CoarseDecoder,
    FinalDecoder,
    MaskTriple,
    SbdLatent,
    SpatialBroadcastDecoder,
    UNet,
)
from camoflow.model.encoder import PyramidEncoder, PyramidFeatures
from camoflow.model.fusion import MSFI, FusedFeatures, PlainFusion, SkipStack
from camoflow.model.network import CamoNet, NetworkOutput, build_model
from camoflow.model.selective import MAC, ExtractStack, MskmBlock, MskmState, PlainBlock

__all__ = [
    'AuxHeads',
    'CoarseDecoder',
    'FinalDecoder',
    'MaskTriple',
    'SbdLatent',
    'SpatialBroadcastDecoder',
    'UNet',
    'PyramidEncoder',
    'PyramidFeatures',
    'MSFI',
    'FusedFeatures',
    'PlainFusion',
    'SkipStack',
    'CamoNet',
    'NetworkOutput',
    'build_model',
    'MAC',
    'ExtractStack',
    'MskmBlock',
    'MskmState',
    'PlainBlock',
]
