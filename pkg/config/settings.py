"""
Configuration settings for hgpairs
Environment-driven defaults; scenario files override them per run
"""

import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Directories
CONFIG_DIR = os.getenv('HGPAIRS_CONFIG_DIR', 'scenarios')
OUTPUT_DIR = os.getenv('HGPAIRS_OUTPUT_DIR', 'output')

# Parallelism
N_JOBS = int(os.getenv('HGPAIRS_N_JOBS', '1'))
SLICE_S = float(os.getenv('HGPAIRS_SLICE_S', '1.0'))  # wall-time slice for partitioned generation

# Detector defaults (jitter is an assumption, the APD model is not given)
DEFAULT_JITTER_PS = float(os.getenv('DEFAULT_JITTER_PS', '400'))
DEFAULT_DEAD_TIME_NS = float(os.getenv('DEFAULT_DEAD_TIME_NS', '50'))
DEFAULT_DARK_RATE = float(os.getenv('DEFAULT_DARK_RATE', '100'))  # counts/s

# Chopper defaults
DEFAULT_CHOPPER_PERIOD_MS = float(os.getenv('DEFAULT_CHOPPER_PERIOD_MS', '1.0'))
DEFAULT_CHOPPER_DUTY = float(os.getenv('DEFAULT_CHOPPER_DUTY', '0.5'))

# Correlator defaults
DEFAULT_BIN_NS = float(os.getenv('DEFAULT_BIN_NS', '0.8'))
DEFAULT_RANGE_NS = float(os.getenv('DEFAULT_RANGE_NS', '100'))

# Spatial filtering (pinhole + single mode fiber), in units of the mode waist
DEFAULT_PINHOLE_RADIUS_FRACTION = float(os.getenv('DEFAULT_PINHOLE_RADIUS_FRACTION', '0.5'))
DEFAULT_FIBER_WAIST_FRACTION = float(os.getenv('DEFAULT_FIBER_WAIST_FRACTION', '0.5'))
DEFAULT_GRID_SAMPLES = int(os.getenv('DEFAULT_GRID_SAMPLES', '129'))
DEFAULT_WAIST_MM = float(os.getenv('DEFAULT_WAIST_MM', '1.0'))

# Cavity defaults (path length reproduces the 0.94 ns round trip)
DEFAULT_OPTICAL_PATH_MM = float(os.getenv('DEFAULT_OPTICAL_PATH_MM', '140.9'))
DEFAULT_PDH_MODULATION_MHZ = float(os.getenv('DEFAULT_PDH_MODULATION_MHZ', '10.8'))

# Logging Configuration
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_FILE = os.getenv('LOG_FILE', '')
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
