"""
Correlator for hgpairs
Start-stop coincidence histogramming of two time-tag streams, accidental
normalization to g2(tau), envelope fitting and the non-classicality test
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from numba import njit
from scipy.optimize import least_squares

from .biphoton import (
    CLASSICAL_BOUND,
    BiphotonSpec,
    bandwidth_to_fwhm,
    blurred_binned_model,
    fwhm_to_bandwidth,
    half_max_width,
)
from .errors import CorrelatorError, FitError
from .event_sim import TimeTagStream

logger = logging.getLogger(__name__)

MIN_PEAK_BINS = 20
FAR_WING_DECAYS = 5.0
FAR_WING_TOLERANCE = 0.05
FLOOR_BOUNDS = (0.9, 1.1)


@dataclass(frozen=True, eq=False)
class CorrelationHistogram:
    bin_ps: int
    half_bins: int
    counts: np.ndarray = field(repr=False)
    singles_s: int
    singles_i: int
    duration_s: float

    @property
    def bin_ns(self) -> float:
        return self.bin_ps * 1e-3

    @property
    def range_ns(self) -> float:
        return self.half_bins * self.bin_ns

    @property
    def tau_ns(self) -> np.ndarray:
        return (np.arange(self.counts.size) - self.half_bins) * self.bin_ns

    def bin_widths_ps(self) -> np.ndarray:
        """Integer delays per bin; the central bin keeps both half-bin ties when bin_ps is even"""
        widths = np.full(self.counts.size, self.bin_ps, dtype=float)
        if self.bin_ps % 2 == 0:
            widths[self.half_bins] += 1
        return widths

    def mirrored(self) -> 'CorrelationHistogram':
        return CorrelationHistogram(self.bin_ps, self.half_bins, self.counts[::-1].copy(),
                                    self.singles_i, self.singles_s, self.duration_s)


@dataclass(frozen=True)
class EnvelopeFit:
    floor: float
    floor_err: float
    contrast: float
    contrast_err: float
    bandwidth_mhz: float
    bandwidth_err_mhz: float
    center_ns: float
    center_err_ns: float
    fwhm_ns: float
    fwhm_err_ns: float
    chi2_per_dof: float
    evaluations: int

    @property
    def peak_g2(self) -> float:
        """Extrapolated peak floor + B"""
        return self.floor + self.contrast


@dataclass(frozen=True, eq=False)
class G2Estimate:
    tau_ns: np.ndarray = field(repr=False)
    g2: np.ndarray = field(repr=False)
    err: np.ndarray = field(repr=False)
    bin_ns: float
    fit: Optional[EnvelopeFit] = None
    far_wing_mean: Optional[float] = None

    @property
    def central_index(self) -> int:
        return int(np.argmin(np.abs(self.tau_ns)))

    @property
    def g2_0(self) -> float:
        return float(self.g2[self.central_index])

    @property
    def g2_0_err(self) -> float:
        return float(self.err[self.central_index])


@njit(cache=True, nogil=True)
def _sweep(s, i, bin_ps, half_bins, start, stop, lo):
    counts = np.zeros(2 * half_bins + 1, dtype=np.int64)
    limit2 = (2 * half_bins + 1) * bin_ps
    n_i = i.size
    for k in range(start, stop):
        t = s[k]
        while lo < n_i and 2 * (i[lo] - t) < -limit2:
            lo += 1
        j = lo
        while j < n_i and 2 * (i[j] - t) <= limit2:
            d = i[j] - t
            num = 2 * abs(d) - bin_ps
            if num <= 0:
                kk = 0
            else:
                # ties on a bin edge go to the bin nearer zero
                kk = (num + 2 * bin_ps - 1) // (2 * bin_ps)
            if d < 0:
                counts[half_bins - kk] += 1
            else:
                counts[half_bins + kk] += 1
            j += 1
    return counts


def _check_sorted(stream: TimeTagStream):
    ts = stream.timestamps_ps
    if ts.size > 1 and np.any(np.diff(ts) < 0):
        raise CorrelatorError(f"Stream '{stream.label}' is not sorted")


def histogram(s: TimeTagStream, i: TimeTagStream, bin_ns: float, range_ns: float,
              n_jobs: int = 1) -> CorrelationHistogram:
    """
    Count idler minus signal delays in 2 n + 1 bins of width bin_ns centered on
    k * bin_ns, |k| <= n = round(range/bin). The signal stream may be split
    across n_jobs partitions; per-partition counts are summed.
    """
    if not bin_ns > 0:
        raise CorrelatorError(f"Bin width must be positive, got {bin_ns}")
    if range_ns < 10 * bin_ns:
        raise CorrelatorError(f"Range {range_ns} ns must be at least 10 bins of {bin_ns} ns")
    _check_sorted(s)
    _check_sorted(i)

    bin_ps = int(round(bin_ns * 1e3))
    if bin_ps < 1:
        raise CorrelatorError(f"Bin width {bin_ns} ns is below the 1 ps tag resolution")
    half_bins = int(round(range_ns / bin_ns))
    s_tags = np.ascontiguousarray(s.timestamps_ps, dtype=np.int64)
    i_tags = np.ascontiguousarray(i.timestamps_ps, dtype=np.int64)

    reach = (2 * half_bins + 1) * bin_ps // 2 + 1
    edges = np.linspace(0, s_tags.size, max(1, n_jobs) + 1).astype(np.int64)
    starts = [int(np.searchsorted(i_tags, s_tags[a] - reach)) if a < s_tags.size else 0 for a in edges[:-1]]
    parts = Parallel(n_jobs=n_jobs, prefer='threads')(
        delayed(_sweep)(s_tags, i_tags, bin_ps, half_bins, int(a), int(b), lo)
        for a, b, lo in zip(edges[:-1], edges[1:], starts)
    )
    counts = np.sum(parts, axis=0).astype(np.int64)

    duration = min(s.live_time_s, i.live_time_s)
    logger.info(
        f"Histogram: {counts.sum()} coincidences in {counts.size} bins of {bin_ps} ps "
        f"from {len(s)} x {len(i)} tags"
    )
    return CorrelationHistogram(bin_ps, half_bins, counts, len(s), len(i), duration)


def normalize(h: CorrelationHistogram) -> G2Estimate:
    """g2 = C T / (N_s N_i dt) with Poisson errors; empty bins use sqrt(1)"""
    if h.singles_s <= 0 or h.singles_i <= 0:
        raise CorrelatorError("Cannot normalize a histogram with zero singles")
    if not h.duration_s > 0:
        raise CorrelatorError(f"Effective duration must be positive, got {h.duration_s}")
    accidentals = h.singles_s * h.singles_i * (h.bin_widths_ps() * 1e-12) / h.duration_s
    counts = h.counts.astype(float)
    g2 = counts / accidentals
    err = np.sqrt(np.maximum(counts, 1.0)) / accidentals
    return G2Estimate(h.tau_ns, g2, err, h.bin_ns)


def _envelope(params, tau):
    floor, contrast, bandwidth_mhz, center = params
    return floor + contrast * np.exp(-2.0 * math.pi * bandwidth_mhz * 1e-3 * np.abs(tau - center))


def far_wing_mean(estimate: G2Estimate, bandwidth_mhz: float) -> Optional[float]:
    """Mean g2 over |tau - 0| > 5 decay constants 1/(2 pi dnu); None when no bin qualifies"""
    cutoff = FAR_WING_DECAYS / (2.0 * math.pi * bandwidth_mhz * 1e-3)
    wing = np.abs(estimate.tau_ns) > cutoff
    if not wing.any():
        return None
    return float(np.mean(estimate.g2[wing]))


def _initial_guess(estimate: G2Estimate) -> np.ndarray:
    """Floor from the far wing of a half-maximum bandwidth estimate, then width above that floor"""
    tau, g2 = estimate.tau_ns, estimate.g2
    peak = int(np.argmax(g2))
    width = half_max_width(tau, g2, 1.0) or np.abs(tau).max() / 4.0
    floor = far_wing_mean(estimate, fwhm_to_bandwidth(width))
    if floor is None:
        logger.debug("No far-wing bins for the starting floor; using the outer fifth of the range")
        floor = float(np.mean(g2[np.abs(tau) >= 0.8 * np.abs(tau).max()]))
    width = half_max_width(tau, g2, floor) or width
    return np.array([floor, g2[peak] - floor, fwhm_to_bandwidth(width), tau[peak]])


def fit_envelope(estimate: G2Estimate) -> EnvelopeFit:
    """
    Weighted least squares of floor + B exp(-2 pi dnu |tau - tau0|) with
    inverse-variance weights. Stops on relative step < 1e-8 or after 200
    evaluations; a fit that runs out of evaluations or finds B within three
    standard errors of zero raises FitError.
    """
    tau, g2, err = estimate.tau_ns, estimate.g2, estimate.err
    if np.any(err <= 0):
        raise FitError("Per-bin errors must be positive")
    x0 = _initial_guess(estimate)
    above = int(np.count_nonzero(g2 > x0[0] + err))
    if above < MIN_PEAK_BINS:
        raise FitError(f"Only {above} bins above floor + error (need {MIN_PEAK_BINS}); no peak found")

    half_range = float(np.abs(tau).max())
    result = least_squares(
        lambda p: (_envelope(p, tau) - g2) / err,
        x0,
        bounds=([-np.inf, 0.0, 1e-6, -half_range], [np.inf, np.inf, np.inf, half_range]),
        xtol=1e-8,
        max_nfev=200,
    )
    if result.status <= 0:
        raise FitError(f"Envelope fit did not converge: {result.message}")

    jac = result.jac
    cov = np.linalg.pinv(jac.T @ jac)
    perr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    floor, contrast, bandwidth, center = (float(v) for v in result.x)
    if contrast < 3.0 * perr[1]:
        raise FitError(f"Contrast {contrast:.3g} +/- {perr[1]:.3g} is consistent with zero")

    dof = max(tau.size - 4, 1)
    fwhm = bandwidth_to_fwhm(bandwidth)
    fit = EnvelopeFit(
        floor=floor,
        floor_err=float(perr[0]),
        contrast=contrast,
        contrast_err=float(perr[1]),
        bandwidth_mhz=bandwidth,
        bandwidth_err_mhz=float(perr[2]),
        center_ns=center,
        center_err_ns=float(perr[3]),
        fwhm_ns=fwhm,
        fwhm_err_ns=fwhm * float(perr[2]) / bandwidth,
        chi2_per_dof=float(2.0 * result.cost / dof),
        evaluations=int(result.nfev),
    )
    if not FLOOR_BOUNDS[0] <= floor <= FLOOR_BOUNDS[1]:
        logger.warning(f"Fitted floor {floor:.3f} outside {FLOOR_BOUNDS}; normalization suspect")
    logger.info(
        f"Envelope fit: dnu={bandwidth:.3f} +/- {perr[2]:.3f} MHz, FWHM={fwhm:.3f} ns, "
        f"B={contrast:.3f}, floor={floor:.4f}, chi2/dof={fit.chi2_per_dof:.3f}"
    )
    return fit


def analyze(estimate: G2Estimate) -> G2Estimate:
    """Attach the envelope fit and the far-wing normalization check"""
    fit = fit_envelope(estimate)
    wing = far_wing_mean(estimate, fit.bandwidth_mhz)
    if wing is None:
        logger.warning("No bins beyond five decay constants; far-wing check skipped")
    elif abs(wing - 1.0) > FAR_WING_TOLERANCE:
        logger.warning(f"Far-wing mean {wing:.4f} outside 1 +/- {FAR_WING_TOLERANCE}")
    return G2Estimate(estimate.tau_ns, estimate.g2, estimate.err, estimate.bin_ns, fit, wing)


def raw_fwhm(estimate: G2Estimate, floor: float = 1.0) -> Optional[float]:
    """Half-maximum width read directly off the normalized histogram"""
    return half_max_width(estimate.tau_ns, estimate.g2, floor)


def nonclassicality(g2_0: float, error: float) -> Tuple[bool, float]:
    """(verdict, z) with z = (g2(0) - 2) / error and verdict z > 3"""
    if not error > 0:
        raise CorrelatorError(f"g2(0) error must be positive, got {error}")
    z = (g2_0 - CLASSICAL_BOUND) / error
    return bool(z > 3.0), float(z)


def chi_square(estimate: G2Estimate, spec: BiphotonSpec, jitter_sigma_ps: float) -> Tuple[float, int]:
    """Chi-square of the estimate against the blurred, bin-averaged model"""
    model = blurred_binned_model(spec, estimate.tau_ns, estimate.bin_ns, jitter_sigma_ps)
    chi2 = float(np.sum(((estimate.g2 - model) / estimate.err) ** 2))
    return chi2, int(estimate.tau_ns.size)
