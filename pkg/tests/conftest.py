"""
Shared fixtures for the hgpairs test suite
"""

from pathlib import Path

import numpy as np
import pytest

from config.scenario import ScenarioConfig
from utils.biphoton import BiphotonSpec
from utils.cavity import CavityParams
from utils.event_sim import TimeTagStream

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / 'scenarios'

# Short, single-mode scenario with loose targets for end-to-end plumbing tests
QUICK_SCENARIO = """
[scenario]
name = quick
seed = 7
duration_s = 10.0
orientation = horizontal

[cavity]
residual_loss = 0.074
phase_matching_bandwidth_ghz = 2234.0

[biphoton]
bandwidth_mhz = 20.8
target_g2_0 = 5.7
mode_count = 1

[source]
efficiency_s = 0.01
efficiency_i = 0.01

[brightness]
corrected_pair_rate_per_s = 5.49
pump_power_mw = 0.06

[spatial]
grid_samples = 65

[targets]
bandwidth_mhz = 20.8
bandwidth_tolerance_fraction = 0.5
fwhm_ns = 10.6
fwhm_tolerance_fraction = 0.5
g2_0 = 5.7
g2_0_sigma_count = 10.0
brightness_per_s_mhz_mw = 4.4
brightness_tolerance_fraction = 0.5
pair_rate_tolerance_fraction = 0.5
model_chi2_per_dof_min = 0.5
model_chi2_per_dof_max = 2.0
"""


@pytest.fixture
def default_cavity():
    return CavityParams()


@pytest.fixture
def envelope_spec():
    """Single-mode spec at the diagonal-mode bandwidth"""
    return BiphotonSpec(bandwidth_mhz=11.4, contrast=6.2)


@pytest.fixture
def quick_scenario_text():
    return QUICK_SCENARIO


@pytest.fixture
def quick_scenario(tmp_path):
    path = tmp_path / 'quick.ini'
    path.write_text(QUICK_SCENARIO)
    return ScenarioConfig.load(path)


@pytest.fixture
def poisson_stream():
    """Factory for an ungated Poisson stream of int64 picosecond tags"""

    def make(rate_per_s, duration_s, seed, channel=0, label='signal'):
        rng = np.random.default_rng(seed)
        n = rng.poisson(rate_per_s * duration_s)
        tags = np.unique(rng.integers(0, int(duration_s * 1e12), n)).astype(np.int64)
        return TimeTagStream(channel, label, tags, duration_s, duration_s)

    return make
