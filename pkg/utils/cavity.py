"""
Cavity calculator for hgpairs
Derives resonator quantities from the two-mirror OPO cavity parameters and
models the Pound-Drever-Hall error signal used to lock it
"""

import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Dict, Optional

import numpy as np
from scipy import constants
from scipy.optimize import brentq

from .errors import CavityError

logger = logging.getLogger(__name__)

C_MM_PER_NS = constants.c * 1e-6  # 299.792458 mm/ns


@dataclass(frozen=True)
class CavityParams:
    optical_path_length_mm: float = 140.9
    output_coupler_transmission: float = 0.045
    input_mirror_transmission: float = 0.0
    residual_loss: float = 0.0
    # recorded metadata, not used in any formula
    mirror_roc_mm: float = 80.0
    crystal_length_mm: float = 10.0
    crystal_refractive_index: float = 1.84

    def validate(self):
        if not self.optical_path_length_mm > 0:
            raise CavityError(f"Optical path length must be positive, got {self.optical_path_length_mm}")
        if not 0 < self.output_coupler_transmission < 1:
            raise CavityError(f"Output coupler transmission must be in (0, 1), got {self.output_coupler_transmission}")
        if not 0 <= self.input_mirror_transmission < 1:
            raise CavityError(f"Input mirror transmission must be in [0, 1), got {self.input_mirror_transmission}")
        if not 0 <= self.residual_loss < 1:
            raise CavityError(f"Residual loss must be in [0, 1), got {self.residual_loss}")

    @property
    def round_trip_survival(self) -> float:
        """Net round-trip amplitude survival factor rho"""
        return math.sqrt(
            (1 - self.output_coupler_transmission)
            * (1 - self.input_mirror_transmission)
            * (1 - self.residual_loss)
        )


@dataclass(frozen=True)
class CavityReport:
    round_trip_time_ns: float
    fsr_ghz: float
    finesse: float
    linewidth_mhz: float

    def to_dict(self) -> Dict[str, float]:
        return {
            'round_trip_time_ns': self.round_trip_time_ns,
            'fsr_ghz': self.fsr_ghz,
            'finesse_dimensionless': self.finesse,
            'linewidth_mhz': self.linewidth_mhz,
        }


def finesse_from_survival(rho: float) -> float:
    return math.pi * math.sqrt(rho) / (1.0 - rho)


def derive_report(params: CavityParams) -> CavityReport:
    """Round trip, FSR, finesse and FWHM linewidth of a linear standing-wave cavity"""
    params.validate()
    rho = params.round_trip_survival
    if rho >= 1:
        raise CavityError(f"Round-trip survival {rho} >= 1 implies gain")
    t_rt = 2.0 * params.optical_path_length_mm / C_MM_PER_NS
    fsr = 1.0 / t_rt
    finesse = finesse_from_survival(rho)
    linewidth = fsr * 1e3 / finesse
    report = CavityReport(t_rt, fsr, finesse, linewidth)
    logger.debug(f"Cavity report: {asdict(report)}")
    return report


def longitudinal_mode_count(phase_matching_bandwidth_ghz: float, fsr_ghz: float) -> int:
    """Resonances inside the phase-matching FWHM, rounded to nearest"""
    if not (phase_matching_bandwidth_ghz > 0 and fsr_ghz > 0):
        raise CavityError("Phase-matching bandwidth and FSR must be positive")
    return int(round(phase_matching_bandwidth_ghz / fsr_ghz))


def residual_loss_for_linewidth(params: CavityParams, linewidth_mhz: float) -> float:
    """Residual round-trip loss that gives the cavity the requested FWHM linewidth"""
    params.validate()
    fsr_mhz = derive_report(replace(params, residual_loss=0.0)).fsr_ghz * 1e3

    def linewidth_at(loss: float) -> float:
        return fsr_mhz / finesse_from_survival(replace(params, residual_loss=loss).round_trip_survival)

    lossless = linewidth_at(0.0)
    if linewidth_mhz < lossless:
        raise CavityError(
            f"Linewidth {linewidth_mhz} MHz is narrower than the lossless limit {lossless:.3f} MHz"
        )
    if linewidth_mhz >= fsr_mhz / 2:
        raise CavityError(f"Linewidth {linewidth_mhz} MHz is not resolvable with FSR {fsr_mhz:.1f} MHz")
    loss = brentq(lambda x: linewidth_at(x) - linewidth_mhz, 0.0, 1.0 - 1e-12, xtol=1e-14)
    logger.info(f"Residual loss {loss:.5f} gives linewidth {linewidth_mhz} MHz")
    return loss


def reflection_coefficient(detuning_mhz, params: CavityParams):
    """
    Field reflection F(f) seen by a beam incident on the cavity through the output
    coupler; the input mirror and residual loss act as the far mirror.
    """
    params.validate()
    report = derive_report(params)
    r1 = math.sqrt(1 - params.output_coupler_transmission)
    r2 = math.sqrt((1 - params.input_mirror_transmission) * (1 - params.residual_loss))
    phase = np.exp(2j * np.pi * np.asarray(detuning_mhz, dtype=float) / (report.fsr_ghz * 1e3))
    value = (-r1 + r2 * phase) / (1 - r1 * r2 * phase)
    return complex(value) if np.ndim(value) == 0 else value


def pdh_error_signal(detuning_mhz, modulation_mhz: float, params: CavityParams):
    """Im[F(f) F*(f+fm) - F*(f) F(f-fm)]; zero and odd about resonance"""
    if not modulation_mhz > 0:
        raise CavityError(f"Modulation frequency must be positive, got {modulation_mhz}")
    f = np.asarray(detuning_mhz, dtype=float)
    carrier = reflection_coefficient(f, params)
    upper = reflection_coefficient(f + modulation_mhz, params)
    lower = reflection_coefficient(f - modulation_mhz, params)
    value = np.imag(carrier * np.conj(upper) - np.conj(carrier) * lower)
    return float(value) if np.ndim(value) == 0 else value


def pdh_scan(params: CavityParams, modulation_mhz: float, span_mhz: float, points: int = 2001):
    """Sampled error signal over [-span, span]"""
    detuning = np.linspace(-span_mhz, span_mhz, points)
    return detuning, pdh_error_signal(detuning, modulation_mhz, params)


def pdh_zero_crossings(params: CavityParams, modulation_mhz: float, span_mhz: float,
                       points: int = 10001, slope: Optional[float] = None) -> np.ndarray:
    """
    Detunings where the sampled error signal changes sign, located by linear
    interpolation. With slope set to +1 or -1 only crossings rising or falling
    in detuning are kept.
    """
    detuning, signal = pdh_scan(params, modulation_mhz, span_mhz, points)
    sign = np.sign(signal)
    crossings = []
    for k in range(len(sign) - 1):
        if sign[k] == 0:
            continue
        nxt = k + 1
        if sign[nxt] == 0:
            if nxt + 1 >= len(sign):
                continue
            nxt += 1
        if sign[nxt] == sign[k]:
            continue
        if slope is not None and np.sign(sign[nxt] - sign[k]) != slope:
            continue
        f0, f1 = detuning[k], detuning[nxt]
        e0, e1 = signal[k], signal[nxt]
        crossings.append(f0 - e0 * (f1 - f0) / (e1 - e0))
    return np.unique(np.round(np.array(crossings), 9))


def pdh_lock_points(params: CavityParams, modulation_mhz: float, span_mhz: float,
                    points: int = 10001) -> np.ndarray:
    """
    Zero crossings with the slope the error signal has at resonance. The
    crossings next to the sidebands at +/-fm have the opposite slope; a servo
    pushes away from them, so they are not lock points.
    """
    lock_slope = np.sign(pdh_error_signal(1e-6, modulation_mhz, params)
                         - pdh_error_signal(-1e-6, modulation_mhz, params))
    return pdh_zero_crossings(params, modulation_mhz, span_mhz, points, slope=lock_slope)
