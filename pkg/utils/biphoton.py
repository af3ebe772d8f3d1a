"""
Biphoton model for hgpairs
Analytic temporal correlation of cavity-enhanced photon pairs: g2(tau) as an
accidental floor plus a double-exponential envelope times the longitudinal-mode
comb, detector blurring, FWHM/bandwidth conversion and spectral brightness
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.signal import fftconvolve

from .errors import BiphotonError, SamplingError

logger = logging.getLogger(__name__)

MODE_PROFILES = ('uniform', 'sinc2')

# sinc(x)^2 falls to one half at x = 1.39156
SINC2_HALF_WIDTH = 1.3915573

# g2(0) above this bound violates the classical Cauchy-Schwarz limit for thermal-like fields
CLASSICAL_BOUND = 2.0

_TAU_CHUNK = 4096


@dataclass(frozen=True)
class BiphotonSpec:
    bandwidth_mhz: float
    contrast: float
    mode_count: int = 1
    round_trip_ns: float = 0.94
    mode_profile: str = 'uniform'

    def validate(self):
        if not self.bandwidth_mhz > 0:
            raise BiphotonError(f"Bandwidth must be positive, got {self.bandwidth_mhz} MHz")
        if not self.contrast >= 0:
            raise BiphotonError(f"Contrast must be non-negative, got {self.contrast}")
        if int(self.mode_count) != self.mode_count or self.mode_count < 1:
            raise BiphotonError(f"Mode count must be a positive integer, got {self.mode_count}")
        if not self.round_trip_ns > 0:
            raise BiphotonError(f"Round-trip time must be positive, got {self.round_trip_ns} ns")
        if self.bandwidth_mhz >= 1e3 / self.round_trip_ns:
            raise BiphotonError(
                f"Bandwidth {self.bandwidth_mhz} MHz is not narrower than the FSR {1e3 / self.round_trip_ns:.1f} MHz"
            )
        if self.mode_profile not in MODE_PROFILES:
            raise BiphotonError(f"Unknown mode profile '{self.mode_profile}', expected one of {MODE_PROFILES}")

    @property
    def decay_rate_per_ns(self) -> float:
        """2 pi dnu in 1/ns"""
        return 2.0 * math.pi * self.bandwidth_mhz * 1e-3

    @property
    def correlation_span_ns(self) -> float:
        """|tau| beyond which the excess correlation is below e^-10"""
        return 10.0 / self.decay_rate_per_ns


@dataclass(frozen=True)
class BrightnessInputs:
    corrected_pair_rate_per_s: float
    duration_s: float
    bandwidth_mhz: float
    pump_power_mw: float

    def validate(self):
        for name in ('corrected_pair_rate_per_s', 'duration_s', 'bandwidth_mhz', 'pump_power_mw'):
            if not getattr(self, name) > 0:
                raise BiphotonError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """g2 sampled on a uniform tau grid (ns)"""
    tau_ns: np.ndarray = field(repr=False)
    g2: np.ndarray = field(repr=False)

    @property
    def step_ns(self) -> float:
        return float(self.tau_ns[1] - self.tau_ns[0])


def mode_amplitudes(mode_count: int, profile: str = 'uniform') -> np.ndarray:
    """Per-mode biphoton amplitudes, centered on the degenerate mode"""
    m = np.arange(mode_count) - (mode_count - 1) / 2.0
    if profile == 'uniform':
        return np.ones(mode_count)
    if profile == 'sinc2':
        # power spectrum sinc^2 whose FWHM spans the mode count
        return np.abs(np.sinc(2.0 * SINC2_HALF_WIDTH * m / (math.pi * mode_count)))
    raise BiphotonError(f"Unknown mode profile '{profile}'")


def comb_kernel(tau_ns, mode_count: int, round_trip_ns: float, profile: str = 'uniform') -> np.ndarray:
    """Squared, peak-normalized Dirichlet comb: D(k T_rt) = 1, D_1 = 1"""
    tau = np.asarray(tau_ns, dtype=float)
    if mode_count == 1:
        return np.ones_like(tau)
    # D has period T_rt; fold tau onto (-T_rt/2, T_rt/2] before forming the phase
    frac = np.remainder(tau, round_trip_ns) / round_trip_ns
    frac = np.where(frac > 0.5, frac - 1.0, frac)
    if profile == 'uniform':
        x = np.pi * frac
        small = np.abs(x) < 1e-9
        safe = np.where(small, 1.0, x)
        ratio = np.where(small, 1.0, np.sin(mode_count * safe) / (mode_count * np.sin(safe)))
        return np.minimum(ratio ** 2, 1.0)

    amps = mode_amplitudes(mode_count, profile)
    m = np.arange(mode_count) - (mode_count - 1) / 2.0
    flat = frac.ravel()
    out = np.empty_like(flat)
    for start in range(0, flat.size, _TAU_CHUNK):
        chunk = flat[start:start + _TAU_CHUNK]
        phases = np.exp(2j * np.pi * np.outer(chunk, m))
        out[start:start + _TAU_CHUNK] = np.abs(phases @ amps) ** 2
    return np.minimum(out / amps.sum() ** 2, 1.0).reshape(tau.shape)


def g2_model(tau_ns, spec: BiphotonSpec):
    """1 + B exp(-2 pi dnu |tau|) D_N(tau)"""
    spec.validate()
    tau = np.asarray(tau_ns, dtype=float)
    envelope = np.exp(-spec.decay_rate_per_ns * np.abs(tau))
    value = 1.0 + spec.contrast * envelope * comb_kernel(tau, spec.mode_count, spec.round_trip_ns, spec.mode_profile)
    return float(value) if np.ndim(value) == 0 else value


def model_step_ns(spec: BiphotonSpec, jitter_sigma_ps: float = 0.0) -> float:
    """Sampling step that resolves the envelope, each comb tooth and the blur kernel"""
    step = 1.0 / spec.decay_rate_per_ns / 200.0
    if spec.mode_count > 1:
        step = min(step, spec.round_trip_ns / (16.0 * spec.mode_count))
    if jitter_sigma_ps > 0:
        step = min(step, jitter_sigma_ps * 1e-3 / 4.0)
    return step


def sample_curve(spec: BiphotonSpec, span_ns: float, step_ns: Optional[float] = None) -> SampledCurve:
    """g2_model on a symmetric grid through tau = 0"""
    step = step_ns or model_step_ns(spec)
    n = int(math.ceil(span_ns / step))
    tau = np.arange(-n, n + 1) * step
    return SampledCurve(tau, g2_model(tau, spec))


def blur(curve: SampledCurve, jitter_sigma_ps: float) -> SampledCurve:
    """Convolve g2 - 1 with a unit-area Gaussian of the given sigma"""
    if jitter_sigma_ps < 0:
        raise SamplingError(f"Jitter sigma must be non-negative, got {jitter_sigma_ps}")
    if jitter_sigma_ps == 0:
        return SampledCurve(curve.tau_ns.copy(), curve.g2.copy())
    sigma_ns = jitter_sigma_ps * 1e-3
    step = curve.step_ns
    if step > sigma_ns / 4.0 * (1 + 1e-9):
        raise SamplingError(f"Curve step {step} ns too coarse for sigma {sigma_ns} ns (need <= sigma/4)")

    half = int(math.ceil(6.0 * sigma_ns / step))
    offsets = np.arange(-half, half + 1) * step
    kernel = np.exp(-0.5 * (offsets / sigma_ns) ** 2)
    kernel /= kernel.sum()
    excess = fftconvolve(curve.g2 - 1.0, kernel, mode='same')
    return SampledCurve(curve.tau_ns.copy(), 1.0 + excess)


def bin_average(curve: SampledCurve, centers_ns, bin_ns: float) -> np.ndarray:
    """Mean of the sampled curve over each [c - bin/2, c + bin/2]"""
    tau = curve.tau_ns
    centers = np.asarray(centers_ns, dtype=float)
    lo = centers - bin_ns / 2.0
    hi = centers + bin_ns / 2.0
    if lo.min() < tau[0] - 1e-9 or hi.max() > tau[-1] + 1e-9:
        raise SamplingError("Bins extend beyond the sampled curve")
    step = curve.step_ns
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (curve.g2[1:] + curve.g2[:-1]) * step)])
    return (np.interp(hi, tau, cumulative) - np.interp(lo, tau, cumulative)) / bin_ns


def blurred_binned_model(spec: BiphotonSpec, centers_ns, bin_ns: float,
                         jitter_sigma_ps: float) -> np.ndarray:
    """What an ideal histogram of detected pairs converges to"""
    centers = np.asarray(centers_ns, dtype=float)
    margin = bin_ns / 2.0 + 8.0 * jitter_sigma_ps * 1e-3 + 1e-3
    span = max(abs(centers.min()), abs(centers.max())) + margin
    curve = sample_curve(spec, span, model_step_ns(spec, jitter_sigma_ps))
    return bin_average(blur(curve, jitter_sigma_ps), centers, bin_ns)


def fwhm_to_bandwidth(fwhm_ns: float) -> float:
    """dnu = ln2 / (pi FWHM), MHz from ns"""
    if not fwhm_ns > 0:
        raise BiphotonError(f"FWHM must be positive, got {fwhm_ns}")
    return math.log(2.0) * 1e3 / (math.pi * fwhm_ns)


def bandwidth_to_fwhm(bandwidth_mhz: float) -> float:
    """FWHM = ln2 / (pi dnu), ns from MHz"""
    if not bandwidth_mhz > 0:
        raise BiphotonError(f"Bandwidth must be positive, got {bandwidth_mhz}")
    return math.log(2.0) * 1e3 / (math.pi * bandwidth_mhz)


def half_max_width(tau_ns, values, floor: float = 1.0) -> Optional[float]:
    """
    Width between the outermost half-maximum crossings around the peak,
    linearly interpolated; None when the curve never drops below half.
    """
    tau = np.asarray(tau_ns, dtype=float)
    vals = np.asarray(values, dtype=float)
    peak_idx = int(np.argmax(vals))
    half = floor + (vals[peak_idx] - floor) / 2.0
    below = vals < half

    left = np.nonzero(below[:peak_idx])[0]
    right = np.nonzero(below[peak_idx:])[0]
    if left.size == 0 or right.size == 0:
        return None
    i = left[-1]
    j = peak_idx + right[0]
    t_left = tau[i] + (half - vals[i]) * (tau[i + 1] - tau[i]) / (vals[i + 1] - vals[i])
    t_right = tau[j - 1] + (half - vals[j - 1]) * (tau[j] - tau[j - 1]) / (vals[j] - vals[j - 1])
    return float(t_right - t_left)


def spectral_brightness(inputs: BrightnessInputs) -> float:
    """Pairs per (s MHz mW)"""
    inputs.validate()
    return inputs.corrected_pair_rate_per_s / (inputs.bandwidth_mhz * inputs.pump_power_mw)


def is_nonclassical_value(g2_0: float) -> bool:
    return g2_0 > CLASSICAL_BOUND


@lru_cache(maxsize=8)
def excess_density_grid(spec: BiphotonSpec, max_step_ps: float = 2.0) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    exp(-2 pi dnu |tau|) D_N(tau) on a uniform grid over |tau| <= 10/(2 pi dnu).

    Returns (tau_ps, density, area_ps). For a comb the grid step divides the
    round trip so each period is evaluated once and tiled.
    """
    spec.validate()
    span_ps = spec.correlation_span_ns * 1e3
    rate_per_ps = spec.decay_rate_per_ns * 1e-3

    if spec.mode_count == 1:
        n = int(math.ceil(span_ps / max_step_ps))
        step = span_ps / n
        tau = np.arange(-n, n + 1) * step
        density = np.exp(-rate_per_ps * np.abs(tau))
    else:
        period_ps = spec.round_trip_ns * 1e3
        per_period = max(int(math.ceil(period_ps / max_step_ps)), 8 * spec.mode_count)
        step = period_ps / per_period
        n = int(math.ceil(span_ps / step))
        j = np.arange(-n, n + 1)
        one_period = comb_kernel(np.arange(per_period) * step * 1e-3, spec.mode_count,
                                 spec.round_trip_ns, spec.mode_profile)
        tau = j * step
        density = np.exp(-rate_per_ps * np.abs(tau)) * one_period[np.mod(j, per_period)]

    area = float(step * (density.sum() - 0.5 * (density[0] + density[-1])))
    logger.debug(f"Excess density grid: {tau.size} points, step {step:.4f} ps, area {area:.3f} ps")
    return tau, density, area


def pair_rate_for_contrast(spec: BiphotonSpec) -> float:
    """
    Generated pair rate (1/s) at which accidental-normalized coincidences
    reproduce g2_model: g2 - 1 = f(tau) / R_p with f the normalized delay density.
    """
    spec.validate()
    if spec.contrast <= 0:
        raise BiphotonError("Contrast must be positive to define a pair rate")
    _, _, area_ps = excess_density_grid(spec)
    return 1.0 / (spec.contrast * area_ps * 1e-12)


def calibrate_contrast(target_g2_0: float, singles_rate_s: Optional[float], singles_rate_i: Optional[float],
                       bin_ns: float, jitter_sigma_ps: float, skeleton: BiphotonSpec) -> BiphotonSpec:
    """
    Contrast B whose blurred, bin-averaged model peaks at target_g2_0 in the
    central bin. The binned peak is linear in B, so B follows from one
    evaluation at unit contrast. Singles rates only feed the logged
    accidental estimate; pass None when the pair rate is itself derived from B.
    """
    if not target_g2_0 > 1:
        raise BiphotonError(f"Target g2(0) = {target_g2_0} is unreachable with non-negative contrast")
    unit = replace(skeleton, contrast=1.0)
    unit.validate()
    peak_excess = float(blurred_binned_model(unit, [0.0], bin_ns, jitter_sigma_ps)[0]) - 1.0
    if peak_excess <= 0:
        raise BiphotonError("Model has no excess correlation in the central bin")
    contrast = (target_g2_0 - 1.0) / peak_excess
    spec = replace(skeleton, contrast=contrast)

    logger.info(
        f"Calibrated contrast B={contrast:.4g} for g2(0)={target_g2_0} "
        f"(bin {bin_ns} ns, sigma {jitter_sigma_ps} ps); implied pair rate {pair_rate_for_contrast(spec):.4g}/s"
    )
    if singles_rate_s is not None and singles_rate_i is not None:
        accidentals = singles_rate_s * singles_rate_i * bin_ns * 1e-9
        logger.info(
            f"Expected central bin: {accidentals:.4g} accidental and "
            f"{accidentals * (target_g2_0 - 1.0):.4g} true coincidences per second"
        )
    return spec
