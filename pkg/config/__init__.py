"""
Configuration package for hgpairs
"""

from .settings import *

__all__ = [
    'CONFIG_DIR',
    'OUTPUT_DIR',
    'N_JOBS',
    'SLICE_S',
    'DEFAULT_JITTER_PS',
    'DEFAULT_DEAD_TIME_NS',
    'DEFAULT_DARK_RATE',
    'DEFAULT_CHOPPER_PERIOD_MS',
    'DEFAULT_CHOPPER_DUTY',
    'DEFAULT_BIN_NS',
    'DEFAULT_RANGE_NS',
    'DEFAULT_PINHOLE_RADIUS_FRACTION',
    'DEFAULT_FIBER_WAIST_FRACTION',
    'DEFAULT_GRID_SAMPLES',
    'DEFAULT_WAIST_MM',
    'DEFAULT_OPTICAL_PATH_MM',
    'DEFAULT_PDH_MODULATION_MHZ',
    'LOG_LEVEL',
    'LOG_FILE',
    'LOG_FORMAT'
]
