"""
Utilities package for hgpairs
"""

from .biphoton import BiphotonSpec, BrightnessInputs, SampledCurve
from .cavity import CavityParams, CavityReport
from .correlator import CorrelationHistogram, EnvelopeFit, G2Estimate
from .event_sim import ChopperConfig, DetectorConfig, SourceConfig, TimeTagStream
from .spatial_modes import GridSpec, JointSpatialState, SampledField, TransverseMode

__all__ = [
    'BiphotonSpec',
    'BrightnessInputs',
    'SampledCurve',
    'CavityParams',
    'CavityReport',
    'CorrelationHistogram',
    'EnvelopeFit',
    'G2Estimate',
    'ChopperConfig',
    'DetectorConfig',
    'SourceConfig',
    'TimeTagStream',
    'GridSpec',
    'JointSpatialState',
    'SampledField',
    'TransverseMode'
]
