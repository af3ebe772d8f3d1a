"""
Spatial Modes for hgpairs
Handles LG/HG transverse fields on a square grid, oriented HG superpositions,
overlaps, pinhole-petal fiber coupling and the two-photon orientation law
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import eval_genlaguerre, eval_hermite

from .errors import GridError, ModeError

logger = logging.getLogger(__name__)

MIN_SAMPLES = 33
MIN_HALF_WIDTH_WAISTS = 3.0

# LG modes this toolkit supports, keyed by (p, l); HG modes keyed by (m, n)
SUPPORTED_LG = {(0, -1), (0, 0), (0, 1)}
SUPPORTED_HG = {(0, 0), (0, 1), (1, 0)}

# basis order for coefficient expansions
BASIS = ('LG0+1', 'LG0-1', 'LG00')


@dataclass(frozen=True)
class TransverseMode:
    """LG_p^l or HG_mn label plus waist (mm)"""
    family: str
    first: int   # p for LG, m for HG
    second: int  # l for LG, n for HG
    waist_mm: float

    @classmethod
    def lg(cls, l: int, waist_mm: float, p: int = 0) -> 'TransverseMode':
        return cls('LG', p, l, waist_mm)

    @classmethod
    def hg(cls, m: int, n: int, waist_mm: float) -> 'TransverseMode':
        return cls('HG', m, n, waist_mm)

    def validate(self):
        if not self.waist_mm > 0:
            raise ModeError(f"Waist must be positive, got {self.waist_mm} mm")
        if self.family == 'LG':
            if (self.first, self.second) not in SUPPORTED_LG:
                raise ModeError(f"Unsupported LG mode p={self.first}, l={self.second}")
        elif self.family == 'HG':
            if (self.first, self.second) not in SUPPORTED_HG:
                raise ModeError(f"Unsupported HG mode m={self.first}, n={self.second}")
        else:
            raise ModeError(f"Unknown mode family '{self.family}'")

    @property
    def label(self) -> str:
        if self.family == 'LG':
            return f"LG{self.first}^{self.second:+d}" if self.second else f"LG{self.first}^0"
        return f"HG{self.first}{self.second}"


@dataclass(frozen=True)
class GridSpec:
    """Square grid centered on the optic axis"""
    half_width_mm: float
    samples: int

    def validate(self):
        if self.samples < MIN_SAMPLES:
            raise GridError(f"Grid too coarse: {self.samples} samples per side (need >= {MIN_SAMPLES})")
        if self.samples % 2 == 0:
            raise GridError(f"Samples per side must be odd, got {self.samples}")
        if not self.half_width_mm > 0:
            raise GridError(f"Grid half-width must be positive, got {self.half_width_mm}")

    @property
    def step_mm(self) -> float:
        return 2.0 * self.half_width_mm / (self.samples - 1)

    @property
    def cell_area(self) -> float:
        return self.step_mm ** 2

    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width_mm, self.half_width_mm, self.samples)

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """(x, y) arrays, rows index y"""
        ax = self.axis()
        return np.meshgrid(ax, ax, indexing='xy')

    @classmethod
    def for_waist(cls, waist_mm: float, samples: int, waists: float = 3.5) -> 'GridSpec':
        return cls(waists * waist_mm, samples)


@dataclass(frozen=True, eq=False)
class SampledField:
    grid: GridSpec
    amplitude: np.ndarray = field(repr=False)

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        return math.sqrt(float(np.sum(self.intensity())) * self.grid.cell_area)


@dataclass(frozen=True)
class JointSpatialState:
    """Two weighted (signal mode, idler mode) terms"""
    terms: Tuple[Tuple[TransverseMode, TransverseMode], ...]
    weights: Tuple[complex, ...]

    @classmethod
    def default(cls, waist_mm: float = 1.0) -> 'JointSpatialState':
        """(|+1,-1> + |-1,+1>)/sqrt(2), the pair emitted by the OPO for l=1"""
        plus = TransverseMode.lg(1, waist_mm)
        minus = TransverseMode.lg(-1, waist_mm)
        c = 1.0 / math.sqrt(2.0)
        return cls(((plus, minus), (minus, plus)), (c, c))

    def validate(self):
        if len(self.terms) != len(self.weights) or not self.terms:
            raise ModeError("Joint state needs one weight per term")
        for signal, idler in self.terms:
            signal.validate()
            idler.validate()
        total = sum(abs(c) ** 2 for c in self.weights)
        if abs(total - 1.0) > 1e-9:
            raise ModeError(f"Joint state weights not normalized: sum |c|^2 = {total}")


def _check_grid_for_mode(mode: TransverseMode, grid: GridSpec):
    grid.validate()
    if grid.half_width_mm < MIN_HALF_WIDTH_WAISTS * mode.waist_mm * (1 - 1e-12):
        raise GridError(
            f"Grid half-width {grid.half_width_mm} mm smaller than {MIN_HALF_WIDTH_WAISTS} waists "
            f"({mode.waist_mm} mm)"
        )


def _lg_amplitude(x, y, p: int, l: int, w: float) -> np.ndarray:
    r2 = x ** 2 + y ** 2
    al = abs(l)
    norm = math.sqrt(2.0 * math.factorial(p) / (math.pi * math.factorial(p + al))) / w
    radial = (np.sqrt(2.0 * r2) / w) ** al * eval_genlaguerre(p, al, 2.0 * r2 / w ** 2)
    phase = np.exp(1j * l * np.arctan2(y, x))
    return norm * radial * np.exp(-r2 / w ** 2) * phase


def _hg_amplitude(x, y, m: int, n: int, w: float) -> np.ndarray:
    norm = math.sqrt(2.0 / math.pi) / w / math.sqrt(2.0 ** (m + n) * math.factorial(m) * math.factorial(n))
    s = math.sqrt(2.0) / w
    u = eval_hermite(m, s * x) * eval_hermite(n, s * y) * np.exp(-(x ** 2 + y ** 2) / w ** 2)
    return (norm * u).astype(complex)


def evaluate_field(mode: TransverseMode, grid: GridSpec) -> SampledField:
    """Sample a normalized mode at the waist plane"""
    mode.validate()
    _check_grid_for_mode(mode, grid)
    x, y = grid.mesh()
    if mode.family == 'LG':
        amp = _lg_amplitude(x, y, mode.first, mode.second, mode.waist_mm)
    else:
        amp = _hg_amplitude(x, y, mode.first, mode.second, mode.waist_mm)
    return SampledField(grid, amp)


def hg_superposition(theta_rel: float, waist_mm: float, grid: Optional[GridSpec] = None,
                     samples: int = 129) -> SampledField:
    """(LG0^+1 + e^{i theta_rel} LG0^-1)/sqrt(2); lobe axis sits at theta_rel/2"""
    grid = grid or GridSpec.for_waist(waist_mm, samples)
    plus = evaluate_field(TransverseMode.lg(1, waist_mm), grid)
    minus = evaluate_field(TransverseMode.lg(-1, waist_mm), grid)
    phase = complex(math.cos(theta_rel), math.sin(theta_rel))
    return SampledField(grid, (plus.amplitude + phase * minus.amplitude) / math.sqrt(2.0))


def overlap(a: SampledField, b: SampledField) -> complex:
    """Discrete inner product <a|b> with midpoint weights"""
    if a.grid != b.grid:
        raise GridError(f"Mismatched grids: {a.grid} vs {b.grid}")
    return complex(np.vdot(a.amplitude, b.amplitude) * a.grid.cell_area)


def petal_center(theta_rel: float, waist_mm: float) -> Tuple[float, float]:
    """Intensity maximum of one lobe of hg_superposition(theta_rel)"""
    r = waist_mm / math.sqrt(2.0)
    return r * math.cos(theta_rel / 2.0), r * math.sin(theta_rel / 2.0)


def petal_project(field_in: SampledField, center: Tuple[float, float], radius_mm: float,
                  fiber_waist_mm: float, hard_edge: bool = False) -> float:
    """
    Fraction of the field's power coupled into a Gaussian fiber mode centered
    on the pinhole after the pinhole has cut out everything outside its disc.

    By default cells straddling the rim are weighted by their covered
    fraction, estimated from the distance of the cell center to the rim;
    cells more than half a cell outside are zeroed. hard_edge=True keeps
    only cell centers inside the disc. Both converge to the same value
    under grid refinement.
    """
    if not radius_mm > 0:
        raise GridError(f"Pinhole radius must be positive, got {radius_mm}")
    if not fiber_waist_mm > 0:
        raise GridError(f"Fiber mode waist must be positive, got {fiber_waist_mm}")

    grid = field_in.grid
    x0, y0 = center
    a = grid.half_width_mm
    # distance from the pinhole center to the nearest point of the grid square
    dx_out = max(abs(x0) - a, 0.0)
    dy_out = max(abs(y0) - a, 0.0)
    if math.hypot(dx_out, dy_out) >= radius_mm:
        raise GridError(f"Pinhole at {center} with radius {radius_mm} mm lies outside the grid")

    x, y = grid.mesh()
    d = np.hypot(x - x0, y - y0)
    if hard_edge:
        coverage = (d <= radius_mm).astype(float)
    else:
        coverage = np.clip((radius_mm - d) / grid.step_mm + 0.5, 0.0, 1.0)
    masked = field_in.amplitude * coverage

    fiber = _hg_amplitude(x - x0, y - y0, 0, 0, fiber_waist_mm)
    coupled = abs(np.vdot(fiber, masked) * grid.cell_area) ** 2
    power = field_in.norm() ** 2
    if power == 0:
        return 0.0
    return float(min(max(coupled / power, 0.0), 1.0))


def principal_axis(field_in: SampledField, isotropy_tol: float = 1e-6) -> Optional[float]:
    """Second-moment axis of the intensity in degrees, [0, 180); None when isotropic"""
    x, y = field_in.grid.mesh()
    inten = field_in.intensity()
    total = inten.sum()
    if total == 0:
        return None
    mx = (inten * x).sum() / total
    my = (inten * y).sum() / total
    sxx = (inten * (x - mx) ** 2).sum() / total
    syy = (inten * (y - my) ** 2).sum() / total
    sxy = (inten * (x - mx) * (y - my)).sum() / total
    anisotropy = math.hypot(sxx - syy, 2.0 * sxy)
    if anisotropy <= isotropy_tol * (sxx + syy):
        return None
    angle = 0.5 * math.degrees(math.atan2(2.0 * sxy, sxx - syy))
    return angle % 180.0


def mode_coefficients(mode: TransverseMode) -> np.ndarray:
    """Exact expansion of a supported mode in the (LG0^+1, LG0^-1, LG0^0) basis"""
    mode.validate()
    s = 1.0 / math.sqrt(2.0)
    key = (mode.family, mode.first, mode.second)
    table = {
        ('LG', 0, 1): [1, 0, 0],
        ('LG', 0, -1): [0, 1, 0],
        ('LG', 0, 0): [0, 0, 1],
        ('HG', 0, 0): [0, 0, 1],
        ('HG', 1, 0): [s, s, 0],
        ('HG', 0, 1): [-1j * s, 1j * s, 0],
    }
    return np.array(table[key], dtype=complex)


def analyzer_coefficients(theta: float) -> np.ndarray:
    """Oriented HG analyzer whose lobe axis sits at theta (theta_rel = 2 theta)"""
    s = 1.0 / math.sqrt(2.0)
    return np.array([s, s * complex(math.cos(2 * theta), math.sin(2 * theta)), 0], dtype=complex)


def joint_orientation_probability(state: JointSpatialState, theta_s: float, theta_i: float,
                                  method: str = 'analytic',
                                  samples: int = 129) -> float:
    """
    |<theta_s| x <theta_i| state>|^2 for oriented HG analyzers.

    'analytic' contracts the exact basis coefficients; 'quadrature' computes
    every single-photon projection by grid overlap and serves as the oracle.
    """
    state.validate()
    amplitude = 0j
    if method == 'analytic':
        a_s = analyzer_coefficients(theta_s)
        a_i = analyzer_coefficients(theta_i)
        for (sig, idl), c in zip(state.terms, state.weights):
            amplitude += c * np.vdot(a_s, mode_coefficients(sig)) * np.vdot(a_i, mode_coefficients(idl))
    elif method == 'quadrature':
        cache = {}

        def project(theta: float, mode: TransverseMode) -> complex:
            key = (theta, mode)
            if key not in cache:
                grid = GridSpec.for_waist(mode.waist_mm, samples)
                analyzer = hg_superposition(2.0 * theta, mode.waist_mm, grid)
                cache[key] = overlap(analyzer, evaluate_field(mode, grid))
            return cache[key]

        for (sig, idl), c in zip(state.terms, state.weights):
            amplitude += c * project(theta_s, sig) * project(theta_i, idl)
    else:
        raise ModeError(f"Unknown projection method '{method}'")
    return float(abs(amplitude) ** 2)
