"""
Scenario configuration for hgpairs
Flat INI sections with unit-suffixed keys; parse, validate and serialize
"""

import configparser
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from .settings import (
    CONFIG_DIR,
    DEFAULT_BIN_NS,
    DEFAULT_CHOPPER_DUTY,
    DEFAULT_CHOPPER_PERIOD_MS,
    DEFAULT_DARK_RATE,
    DEFAULT_DEAD_TIME_NS,
    DEFAULT_FIBER_WAIST_FRACTION,
    DEFAULT_GRID_SAMPLES,
    DEFAULT_JITTER_PS,
    DEFAULT_OPTICAL_PATH_MM,
    DEFAULT_PDH_MODULATION_MHZ,
    DEFAULT_PINHOLE_RADIUS_FRACTION,
    DEFAULT_RANGE_NS,
    DEFAULT_WAIST_MM,
    OUTPUT_DIR,
)
from utils.biphoton import BiphotonSpec, BrightnessInputs
from utils.cavity import CavityParams, CavityReport, derive_report, longitudinal_mode_count
from utils.errors import HGPairsError, ScenarioError
from utils.event_sim import ChopperConfig, DetectorConfig
from utils.spatial_modes import GridSpec

logger = logging.getLogger(__name__)

AUTO = 'auto'
ORIENTATIONS = {
    # label -> theta_rel (rad); the lobe axis sits at theta_rel / 2
    'horizontal': 0.0,
    'diagonal': math.pi / 2.0,
}

# section -> key -> (type, default); None default means required, AUTO means derived
SCHEMA: Dict[str, Dict[str, Tuple[type, Any]]] = {
    'scenario': {
        'name': (str, None),
        'seed': (int, 1),
        'duration_s': (float, None),
        'output_dir': (str, OUTPUT_DIR),
        'orientation': (str, 'diagonal'),
    },
    'cavity': {
        'optical_path_length_mm': (float, DEFAULT_OPTICAL_PATH_MM),
        'output_coupler_transmission': (float, 0.045),
        'input_mirror_transmission': (float, 0.0),
        'residual_loss': (float, 0.0),
        'mirror_roc_mm': (float, 80.0),
        'crystal_length_mm': (float, 10.0),
        'crystal_refractive_index': (float, 1.84),
        'phase_matching_bandwidth_ghz': (float, None),
        'pdh_modulation_mhz': (float, DEFAULT_PDH_MODULATION_MHZ),
    },
    'biphoton': {
        'bandwidth_mhz': (float, None),
        'target_g2_0': (float, None),
        'contrast': (float, AUTO),
        'mode_count': (int, AUTO),
        'round_trip_ns': (float, AUTO),
        'mode_profile': (str, 'uniform'),
    },
    'source': {
        'pair_rate_per_s': (float, AUTO),
        'efficiency_s': (float, None),
        'efficiency_i': (float, None),
    },
    'detector_signal': {
        'jitter_sigma_ps': (float, DEFAULT_JITTER_PS),
        'dead_time_ns': (float, DEFAULT_DEAD_TIME_NS),
        'dark_rate_per_s': (float, DEFAULT_DARK_RATE),
    },
    'detector_idler': {
        'jitter_sigma_ps': (float, DEFAULT_JITTER_PS),
        'dead_time_ns': (float, DEFAULT_DEAD_TIME_NS),
        'dark_rate_per_s': (float, DEFAULT_DARK_RATE),
    },
    'chopper': {
        'period_ms': (float, DEFAULT_CHOPPER_PERIOD_MS),
        'duty': (float, DEFAULT_CHOPPER_DUTY),
    },
    'correlator': {
        'bin_ns': (float, DEFAULT_BIN_NS),
        'range_ns': (float, DEFAULT_RANGE_NS),
    },
    'brightness': {
        'corrected_pair_rate_per_s': (float, None),
        'pump_power_mw': (float, None),
    },
    'spatial': {
        'waist_mm': (float, DEFAULT_WAIST_MM),
        'pinhole_radius_fraction': (float, DEFAULT_PINHOLE_RADIUS_FRACTION),
        'fiber_waist_fraction': (float, DEFAULT_FIBER_WAIST_FRACTION),
        'grid_samples': (int, DEFAULT_GRID_SAMPLES),
    },
    'targets': {
        'bandwidth_mhz': (float, None),
        'bandwidth_tolerance_fraction': (float, 0.1),
        'fwhm_ns': (float, None),
        'fwhm_tolerance_fraction': (float, 0.1),
        'g2_0': (float, None),
        'g2_0_sigma_count': (float, 3.0),
        'brightness_per_s_mhz_mw': (float, None),
        'brightness_tolerance_fraction': (float, 0.1),
        'pair_rate_tolerance_fraction': (float, 0.1),
        'model_chi2_per_dof_min': (float, 0.7),
        'model_chi2_per_dof_max': (float, 1.3),
        'nonclassical': (bool, True),
    },
}


def _format(value: Any) -> str:
    if value is None:
        return AUTO
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(section: str, key: str, raw: str, kind: type, default: Any) -> Any:
    text = raw.strip()
    if default == AUTO and text.lower() == AUTO:
        return None
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in ('true', 'yes', '1', 'on'):
                return True
            if lowered in ('false', 'no', '0', 'off'):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ScenarioError(f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None


@dataclass(frozen=True)
class ScenarioConfig:
    """Typed section -> key -> value mapping; derived ('auto') values are None"""
    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    source_path: Optional[str] = field(default=None, compare=False)

    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.sections[section]

    @property
    def name(self) -> str:
        return self.sections['scenario']['name']

    @property
    def seed(self) -> int:
        return self.sections['scenario']['seed']

    @property
    def theta_rel(self) -> float:
        return ORIENTATIONS[self.sections['scenario']['orientation']]

    @classmethod
    def from_string(cls, text: str, source_path: Optional[str] = None) -> 'ScenarioConfig':
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=source_path or '<string>')
        except configparser.Error as e:
            raise ScenarioError(f"Cannot parse scenario: {e}") from e

        unknown = [s for s in parser.sections() if s not in SCHEMA]
        if unknown:
            raise ScenarioError(f"Unknown section(s): {', '.join(unknown)}")

        sections: Dict[str, Dict[str, Any]] = {}
        for section, keys in SCHEMA.items():
            given = dict(parser.items(section)) if parser.has_section(section) else {}
            extra = sorted(set(given) - set(keys))
            if extra:
                raise ScenarioError(f"Unknown key(s) in [{section}]: {', '.join(extra)}")
            values = {}
            for key, (kind, default) in keys.items():
                if key in given:
                    values[key] = _convert(section, key, given[key], kind, default)
                elif default is None:
                    raise ScenarioError(f"Missing required key [{section}] {key}")
                else:
                    values[key] = None if default == AUTO else default
            sections[section] = values

        config = cls(sections, source_path)
        config.validate()
        return config

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'ScenarioConfig':
        path = Path(path)
        if not path.exists():
            raise ScenarioError(f"Scenario file not found: {path}")
        logger.info(f"Loading scenario {path}")
        return cls.from_string(path.read_text(), str(path))

    @classmethod
    def find(cls, name: str, config_dir: Optional[Union[str, Path]] = None) -> 'ScenarioConfig':
        """A path, or a scenario name looked up as <config_dir>/<name>.ini"""
        candidate = Path(name)
        if candidate.suffix == '.ini' or candidate.exists():
            return cls.load(candidate)
        return cls.load(Path(config_dir or CONFIG_DIR) / f"{name}.ini")

    def serialize(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section, keys in SCHEMA.items():
            parser.add_section(section)
            for key in keys:
                parser.set(section, key, _format(self.sections[section][key]))
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    def cavity_params(self) -> CavityParams:
        c = self.sections['cavity']
        return CavityParams(
            optical_path_length_mm=c['optical_path_length_mm'],
            output_coupler_transmission=c['output_coupler_transmission'],
            input_mirror_transmission=c['input_mirror_transmission'],
            residual_loss=c['residual_loss'],
            mirror_roc_mm=c['mirror_roc_mm'],
            crystal_length_mm=c['crystal_length_mm'],
            crystal_refractive_index=c['crystal_refractive_index'],
        )

    def biphoton_skeleton(self, report: CavityReport) -> BiphotonSpec:
        """BiphotonSpec with derived round trip and mode count; contrast 1 when 'auto'"""
        b = self.sections['biphoton']
        mode_count = b['mode_count']
        if mode_count is None:
            mode_count = longitudinal_mode_count(self.sections['cavity']['phase_matching_bandwidth_ghz'],
                                                 report.fsr_ghz)
        round_trip = b['round_trip_ns'] if b['round_trip_ns'] is not None else report.round_trip_time_ns
        contrast = b['contrast'] if b['contrast'] is not None else 1.0
        return BiphotonSpec(b['bandwidth_mhz'], contrast, mode_count, round_trip, b['mode_profile'])

    def detector_configs(self) -> Tuple[DetectorConfig, DetectorConfig]:
        return tuple(DetectorConfig(**self.sections[name]) for name in ('detector_signal', 'detector_idler'))

    def chopper_config(self) -> ChopperConfig:
        return ChopperConfig(**self.sections['chopper'])

    def combined_jitter_ps(self) -> float:
        """Jitter of the idler minus signal delay"""
        det_s, det_i = self.detector_configs()
        return math.hypot(det_s.jitter_sigma_ps, det_i.jitter_sigma_ps)

    def brightness_inputs(self, bandwidth_mhz: Optional[float] = None) -> BrightnessInputs:
        b = self.sections['brightness']
        return BrightnessInputs(
            corrected_pair_rate_per_s=b['corrected_pair_rate_per_s'],
            duration_s=self.sections['scenario']['duration_s'],
            bandwidth_mhz=bandwidth_mhz or self.sections['biphoton']['bandwidth_mhz'],
            pump_power_mw=b['pump_power_mw'],
        )

    def validate(self):
        """Every section must build a valid object of its owning module"""
        scenario = self.sections['scenario']
        if scenario['orientation'] not in ORIENTATIONS:
            raise ScenarioError(
                f"Unknown orientation '{scenario['orientation']}', expected one of {sorted(ORIENTATIONS)}"
            )
        if not scenario['duration_s'] > 0:
            raise ScenarioError(f"duration_s must be positive, got {scenario['duration_s']}")

        section = 'cavity'
        try:
            report = derive_report(self.cavity_params())
            section = 'biphoton'
            self.biphoton_skeleton(report).validate()
            if self.sections['biphoton']['contrast'] is None and not self.sections['biphoton']['target_g2_0'] > 1:
                raise ScenarioError("target_g2_0 must exceed 1 when contrast is 'auto'")
            section = 'source'
            src = self.sections['source']
            for key in ('efficiency_s', 'efficiency_i'):
                if not 0 < src[key] <= 1:
                    raise ScenarioError(f"{key} must be in (0, 1], got {src[key]}")
            if src['pair_rate_per_s'] is not None and not src['pair_rate_per_s'] > 0:
                raise ScenarioError(f"pair_rate_per_s must be positive, got {src['pair_rate_per_s']}")
            section = 'detector'
            for det in self.detector_configs():
                det.validate()
            section = 'chopper'
            self.chopper_config().validate()
            section = 'correlator'
            corr = self.sections['correlator']
            if not corr['bin_ns'] > 0 or corr['range_ns'] < 10 * corr['bin_ns']:
                raise ScenarioError(f"Need bin_ns > 0 and range_ns >= 10 bins, got {corr}")
            section = 'brightness'
            self.brightness_inputs().validate()
            section = 'spatial'
            sp = self.sections['spatial']
            if not (sp['waist_mm'] > 0 and sp['pinhole_radius_fraction'] > 0 and sp['fiber_waist_fraction'] > 0):
                raise ScenarioError("Spatial waist and fractions must be positive")
            GridSpec.for_waist(sp['waist_mm'], sp['grid_samples']).validate()
            section = 'targets'
            t = self.sections['targets']
            if not 0 < t['model_chi2_per_dof_min'] < t['model_chi2_per_dof_max']:
                raise ScenarioError(
                    f"Need 0 < model_chi2_per_dof_min < model_chi2_per_dof_max, got "
                    f"{t['model_chi2_per_dof_min']} and {t['model_chi2_per_dof_max']}"
                )
        except ScenarioError:
            raise
        except HGPairsError as e:
            raise ScenarioError(f"[{section}] {e}") from e
