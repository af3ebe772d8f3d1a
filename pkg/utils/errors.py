"""
Exceptions raised by hgpairs
"""


class HGPairsError(Exception):
    """Base class for every error the toolchain raises on purpose"""


class ModeError(HGPairsError, ValueError):
    """Unsupported transverse mode or malformed joint state"""


class GridError(HGPairsError, ValueError):
    """Sampling grid too coarse, too small, or mismatched"""


class CavityError(HGPairsError, ValueError):
    """Invalid resonator parameters"""


class BiphotonError(HGPairsError, ValueError):
    """Invalid temporal model parameters or unreachable calibration target"""


class SamplingError(HGPairsError, ValueError):
    """Sampled curve too sparse for the requested operation"""


class CorrelatorError(HGPairsError, ValueError):
    """Bad time-tag input to the correlator"""


class FitError(HGPairsError):
    """Envelope fit failed to converge or found no peak"""


class ScenarioError(HGPairsError, ValueError):
    """Scenario file failed to parse or validate"""


class TimeTagFormatError(HGPairsError, ValueError):
    """Time-tag file is not in the expected format"""


class StageError(HGPairsError):
    """Wraps a failure inside run_scenario with the name of the failing stage"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
