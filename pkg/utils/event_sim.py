"""
Event Simulator for hgpairs
Monte Carlo generation of signal/idler time-tag streams from a biphoton model,
a pair of detector models and a chopper gate
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed
from numba import njit
from tqdm import tqdm

from config.settings import SLICE_S
from .biphoton import BiphotonSpec, excess_density_grid
from .errors import SamplingError

logger = logging.getLogger(__name__)

SIGNAL_CHANNEL = 0
IDLER_CHANNEL = 1

PS_PER_S = 1_000_000_000_000


def derive_seed(seed: int, stage: str) -> int:
    """Named 64-bit sub-seed: sha256 of '<seed>:<stage>'"""
    digest = hashlib.sha256(f"{int(seed)}:{stage}".encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


@dataclass(frozen=True)
class SourceConfig:
    pair_rate_per_s: float
    efficiency_s: float
    efficiency_i: float
    spec: BiphotonSpec
    seed: int = 1

    def validate(self):
        if not self.pair_rate_per_s > 0:
            raise SamplingError(f"Pair rate must be positive, got {self.pair_rate_per_s}")
        for name in ('efficiency_s', 'efficiency_i'):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise SamplingError(f"{name} must be in (0, 1], got {value}")
        self.spec.validate()


@dataclass(frozen=True)
class DetectorConfig:
    jitter_sigma_ps: float = 400.0
    dead_time_ns: float = 50.0
    dark_rate_per_s: float = 100.0

    def validate(self):
        for name in ('jitter_sigma_ps', 'dead_time_ns', 'dark_rate_per_s'):
            if getattr(self, name) < 0:
                raise SamplingError(f"{name} must be non-negative, got {getattr(self, name)}")


@dataclass(frozen=True)
class ChopperConfig:
    """Detection windows [k P, k P + duty P) in wall time"""
    period_ms: float = 1.0
    duty: float = 0.5

    def validate(self):
        if not self.period_ms > 0:
            raise SamplingError(f"Chopper period must be positive, got {self.period_ms} ms")
        if not 0 < self.duty <= 1:
            raise SamplingError(f"Chopper duty must be in (0, 1], got {self.duty}")
        if self.window_ps < 1:
            raise SamplingError("Chopper detection window is shorter than 1 ps")

    @property
    def period_ps(self) -> int:
        return int(round(self.period_ms * 1e9))

    @property
    def window_ps(self) -> int:
        return int(round(self.period_ps * self.duty))

    def in_window(self, t_ps: np.ndarray) -> np.ndarray:
        return np.mod(t_ps, self.period_ps) < self.window_ps

    def gated_time_ps(self, wall_ps: float) -> float:
        """Open-window time elapsed between 0 and wall_ps"""
        k = math.floor(wall_ps / self.period_ps)
        return k * self.window_ps + min(wall_ps - k * self.period_ps, self.window_ps)

    def to_wall_ps(self, gated_ps: np.ndarray) -> np.ndarray:
        k = np.floor(gated_ps / self.window_ps)
        return k * self.period_ps + (gated_ps - k * self.window_ps)

    def live_time_s(self, duration_s: float) -> float:
        return self.gated_time_ps(duration_s * PS_PER_S) / PS_PER_S


@dataclass(frozen=True, eq=False)
class TimeTagStream:
    channel: int
    label: str
    timestamps_ps: np.ndarray = field(repr=False)
    duration_s: float
    live_time_s: float

    def __len__(self) -> int:
        return int(self.timestamps_ps.size)

    @property
    def duration_ps(self) -> int:
        return int(round(self.duration_s * PS_PER_S))

    def validate(self):
        ts = self.timestamps_ps
        if ts.dtype != np.int64:
            raise SamplingError(f"Timestamps must be int64 picoseconds, got {ts.dtype}")
        if ts.size and (ts[0] < 0 or ts[-1] > self.duration_ps):
            raise SamplingError(f"Stream '{self.label}' has tags outside [0, {self.duration_s}] s")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise SamplingError(f"Stream '{self.label}' is not strictly increasing")


@lru_cache(maxsize=4)
def _delay_table(spec: BiphotonSpec) -> Tuple[np.ndarray, np.ndarray]:
    tau, density, _ = excess_density_grid(spec)
    step = tau[1] - tau[0]
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * step)])
    cdf /= cdf[-1]
    return tau, cdf


def sample_delay(spec: BiphotonSpec, u):
    """Idler minus signal delay (ps) by inverse-CDF lookup of the excess correlation"""
    tau, cdf = _delay_table(spec)
    value = np.interp(u, cdf, tau)
    return float(value) if np.ndim(value) == 0 else value


@njit(cache=True)
def _dead_time_keep(ts, dead_ps):
    keep = np.ones(ts.size, dtype=np.bool_)
    last = 0
    have_last = False
    for k in range(ts.size):
        if have_last and ts[k] - last < dead_ps:
            keep[k] = False
        else:
            last = ts[k]
            have_last = True
    return keep


def _make_strictly_increasing(ts: np.ndarray) -> np.ndarray:
    """Sorted int64 tags with ties pushed forward by 1 ps"""
    if ts.size < 2:
        return ts
    idx = np.arange(ts.size, dtype=np.int64)
    return np.maximum.accumulate(ts - idx) + idx


def _within_gate(ts: np.ndarray, gate: ChopperConfig, duration_ps: int) -> np.ndarray:
    return ts[(ts >= 0) & (ts <= duration_ps) & gate.in_window(ts)]


def _dark_tags(rng: np.random.Generator, rate_per_s: float, gate: ChopperConfig,
               wall_start_ps: float, wall_end_ps: float) -> np.ndarray:
    g0 = gate.gated_time_ps(wall_start_ps)
    g1 = gate.gated_time_ps(wall_end_ps)
    n = rng.poisson(rate_per_s * (g1 - g0) / PS_PER_S)
    return gate.to_wall_ps(rng.uniform(g0, g1, n))


def _finalize(jittered_ps: np.ndarray, dark_ps: np.ndarray, config: DetectorConfig,
              gate: ChopperConfig, duration_s: float, channel: int, label: str) -> TimeTagStream:
    duration_ps = int(round(duration_s * PS_PER_S))
    tags = np.sort(_within_gate(np.rint(jittered_ps).astype(np.int64), gate, duration_ps))
    if config.dead_time_ns > 0 and tags.size:
        tags = tags[_dead_time_keep(tags, int(round(config.dead_time_ns * 1e3)))]
    darks = _within_gate(np.rint(dark_ps).astype(np.int64), gate, duration_ps)
    merged = _make_strictly_increasing(np.sort(np.concatenate([tags, darks])))
    merged = _within_gate(merged, gate, duration_ps)
    stream = TimeTagStream(channel, label, merged, float(duration_s), gate.live_time_s(duration_s))
    stream.validate()
    return stream


def apply_detector(tags_ps, config: DetectorConfig, gate: ChopperConfig, duration_s: float,
                   seed: int = 0, channel: int = SIGNAL_CHANNEL, label: str = 'signal') -> TimeTagStream:
    """Jitter, gate, dead time, darks, strict ordering"""
    config.validate()
    gate.validate()
    tags = np.asarray(tags_ps)
    if tags.size > 1 and np.any(np.diff(tags) < 0):
        raise SamplingError("apply_detector needs sorted input tags")
    rng = np.random.default_rng(derive_seed(seed, f"detector:{label}"))
    jittered = tags.astype(float)
    if config.jitter_sigma_ps > 0:
        jittered = jittered + rng.normal(0.0, config.jitter_sigma_ps, tags.size)
    darks = _dark_tags(rng, config.dark_rate_per_s, gate, 0.0, duration_s * PS_PER_S)
    return _finalize(jittered, darks, config, gate, duration_s, channel, label)


def _generate_slice(source: SourceConfig, detectors: Tuple[DetectorConfig, DetectorConfig],
                    gate: ChopperConfig, base_seed: int, index: int, wall_start_ps: float,
                    wall_end_ps: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng([base_seed, index])
    g0 = gate.gated_time_ps(wall_start_ps)
    g1 = gate.gated_time_ps(wall_end_ps)
    live_s = (g1 - g0) / PS_PER_S
    rate = source.pair_rate_per_s
    eta_s, eta_i = source.efficiency_s, source.efficiency_i

    # surviving photons split into independent Poisson classes
    n_both = rng.poisson(rate * eta_s * eta_i * live_s)
    n_s_only = rng.poisson(rate * eta_s * (1 - eta_i) * live_s)
    n_i_only = rng.poisson(rate * (1 - eta_s) * eta_i * live_s)

    pair_times = gate.to_wall_ps(rng.uniform(g0, g1, n_both))
    delays = sample_delay(source.spec, rng.random(n_both))
    signal = np.concatenate([pair_times, gate.to_wall_ps(rng.uniform(g0, g1, n_s_only))])
    idler = np.concatenate([pair_times + delays, gate.to_wall_ps(rng.uniform(g0, g1, n_i_only))])

    det_s, det_i = detectors
    if det_s.jitter_sigma_ps > 0:
        signal = signal + rng.normal(0.0, det_s.jitter_sigma_ps, signal.size)
    if det_i.jitter_sigma_ps > 0:
        idler = idler + rng.normal(0.0, det_i.jitter_sigma_ps, idler.size)

    dark_s = _dark_tags(rng, det_s.dark_rate_per_s, gate, wall_start_ps, wall_end_ps)
    dark_i = _dark_tags(rng, det_i.dark_rate_per_s, gate, wall_start_ps, wall_end_ps)
    return signal, idler, dark_s, dark_i


def generate(source: SourceConfig, detectors: Tuple[DetectorConfig, DetectorConfig],
             chopper: ChopperConfig, duration_s: float, n_jobs: int = 1,
             slice_s: Optional[float] = None, progress: bool = False) -> Tuple[TimeTagStream, TimeTagStream]:
    """
    Simulate duration_s of wall time. Generation is split into fixed wall-time
    slices, each with its own generator seeded from (source seed, slice index),
    so the result does not depend on n_jobs.
    """
    if not duration_s > 0:
        raise SamplingError(f"Duration must be positive, got {duration_s}")
    source.validate()
    chopper.validate()
    for det in detectors:
        det.validate()

    slice_s = slice_s or SLICE_S
    n_slices = max(1, int(math.ceil(duration_s / slice_s)))
    base_seed = derive_seed(source.seed, 'generate')
    duration_ps = duration_s * PS_PER_S
    bounds = [(k * slice_s * PS_PER_S, min((k + 1) * slice_s * PS_PER_S, duration_ps)) for k in range(n_slices)]

    logger.info(
        f"Generating {duration_s} s at R_p={source.pair_rate_per_s:.4g}/s in {n_slices} slices "
        f"(n_jobs={n_jobs}, live fraction {chopper.duty})"
    )
    parts: List[Tuple[np.ndarray, ...]] = Parallel(n_jobs=n_jobs)(
        delayed(_generate_slice)(source, detectors, chopper, base_seed, k, a, b)
        for k, (a, b) in tqdm(enumerate(bounds), total=n_slices, desc="slices", disable=not progress, leave=False)
    )

    signal_raw = np.concatenate([p[0] for p in parts])
    idler_raw = np.concatenate([p[1] for p in parts])
    dark_s = np.concatenate([p[2] for p in parts])
    dark_i = np.concatenate([p[3] for p in parts])

    signal = _finalize(signal_raw, dark_s, detectors[0], chopper, duration_s, SIGNAL_CHANNEL, 'signal')
    idler = _finalize(idler_raw, dark_i, detectors[1], chopper, duration_s, IDLER_CHANNEL, 'idler')
    logger.info(f"Generated {len(signal)} signal and {len(idler)} idler tags")
    return signal, idler
