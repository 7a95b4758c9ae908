"""
    Far-field (Fraunhofer) slit patterns.

    Single slit:  I(x2) / I(0) = [sin X / X]^2,  X = pi a x2 / (lambda z2)
    Double slit:  envelope * (1 + gamma cos(2 pi d x2 / (lambda z2))) / (1 + gamma)
    gamma in [0, 1] is the degree of coherence between the two slits.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from physics.errors import GammaOutOfRange, NoFringes
from utils.scheduling import piecewise_linear

SERIES_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SlitGeometry:
    a: float
    wavelength: float
    z2: float
    d_sep: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f'slit width must be positive, got {self.a}')
        if not self.wavelength > 0:
            raise ValueError(f'wavelength must be positive, got {self.wavelength}')
        if not self.z2 > 0:
            raise ValueError(f'slit-detector distance must be positive, got {self.z2}')
        if self.d_sep < 0 or (self.d_sep != 0 and not self.d_sep > self.a):
            raise ValueError(f'slit separation must be 0 or larger than the width, got {self.d_sep}')

    @property
    def first_zero(self) -> float:
        """ Detector position of the first envelope zero. """
        return self.wavelength * self.z2 / self.a

    def phase(self, x2) -> np.ndarray:
        return np.pi * self.a * np.asarray(x2, dtype=float) / (self.wavelength * self.z2)


@dataclass(frozen=True)
class Pattern1D:
    x: np.ndarray
    intensity: np.ndarray

    def __post_init__(self):
        if len(self.x) != len(self.intensity):
            raise ValueError('pattern positions and intensities differ in length')
        for arr in (self.x, self.intensity):
            arr.setflags(write=False)


def sinc_squared(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    small = np.abs(X) < SERIES_THRESHOLD
    safe = np.where(small, 1.0, X)
    ratio = np.where(small, 1 - X ** 2 / 6, np.sin(safe) / safe)
    return ratio ** 2


def _envelope(geom: SlitGeometry, x2) -> np.ndarray:
    return sinc_squared(geom.phase(x2))


def _scalar_or_array(values):
    values = np.asarray(values)
    return float(values) if values.ndim == 0 else values


def single_slit_ratio(geom: SlitGeometry, x2):
    if geom.d_sep != 0:
        raise ValueError('single_slit_ratio needs a single slit (d_sep = 0)')
    return _scalar_or_array(_envelope(geom, x2))


def double_slit_pattern(geom: SlitGeometry, gamma: float, x2):
    """ Partially coherent double slit; d_sep = 0 collapses to the single-slit envelope. """
    if not 0 <= gamma <= 1:
        raise GammaOutOfRange(f'gamma must lie in [0, 1], got {gamma}')
    x2 = np.asarray(x2, dtype=float)
    fringes = 1 + gamma * np.cos(2 * np.pi * geom.d_sep * x2 / (geom.wavelength * geom.z2))
    return _scalar_or_array(_envelope(geom, x2) * fringes / (1 + gamma))


def compute_pattern(geom: SlitGeometry, gamma: float, x: Sequence[float]) -> Pattern1D:
    x = np.array(x, dtype=float)
    if geom.d_sep == 0:
        intensity = np.asarray(_envelope(geom, x), dtype=float)
    else:
        intensity = np.asarray(double_slit_pattern(geom, gamma, x), dtype=float)
    peak = intensity.max()
    if not peak > 0:
        raise ValueError('pattern is identically zero on the requested positions')
    return Pattern1D(x=x, intensity=intensity / peak)


def fraunhofer_sum(geom: SlitGeometry, x2, n_sources: int = 10_000, gamma: float = 1.0) -> np.ndarray:
    """
    Numerical far-field oracle: coherent sum over `n_sources` equally spaced point sources
    filling the aperture(s); two slits add with the given mutual coherence.
    """
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    k = 2 * np.pi / geom.wavelength
    offsets = (np.arange(n_sources) + 0.5) / n_sources * geom.a - geom.a / 2
    phases = np.exp(-1j * k * np.outer(x2, offsets) / geom.z2)
    amplitude = phases.mean(axis=1)
    intensity = np.abs(amplitude) ** 2
    if geom.d_sep != 0:
        intensity = intensity * (1 + gamma * np.cos(k * geom.d_sep * x2 / geom.z2)) / (1 + gamma)
    return intensity


def _local_extrema(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    inner = values[1:-1]
    maxima = np.where((inner > values[:-2]) & (inner >= values[2:]))[0] + 1
    minima = np.where((inner < values[:-2]) & (inner <= values[2:]))[0] + 1
    return maxima, minima


def visibility(p: Pattern1D, window: Tuple[int, int] = None) -> float:
    """
    (Imax - Imin) / (Imax + Imin) from the highest fringe maximum in the window and the
    nearest minimum to it.
    """
    start, stop = window if window is not None else (0, len(p.intensity))
    values = np.asarray(p.intensity[start:stop], dtype=float)
    if len(values) < 3:
        raise NoFringes('window too short to hold a fringe')
    # a central maximum sits on the window edge when the window starts at the peak
    padded = np.concatenate(([-np.inf], values, [-np.inf]))
    maxima, _ = _local_extrema(padded)
    _, minima = _local_extrema(values)
    maxima = maxima - 1
    if len(minima) == 0 or len(maxima) == 0:
        raise NoFringes('no interior fringe extrema in the window')
    peak = maxima[np.argmax(values[maxima])]
    trough = minima[np.argmin(np.abs(minima - peak))]
    i_max, i_min = values[peak], values[trough]
    return float((i_max - i_min) / (i_max + i_min))


def gamma_schedule(schedule: Sequence[Sequence[float]], control: float) -> float:
    """
    Coherence as a piecewise-linear function of a control value, e.g. the idler-arm
    filter setting or the inducing-laser power. schedule: [[control, gamma], ...].
    """
    schedule = np.asarray(schedule, dtype=float)
    gamma = float(piecewise_linear(control, schedule[:, 0], schedule[:, 1]))
    if not 0 <= gamma <= 1:
        raise GammaOutOfRange(f'scheduled gamma {gamma} outside [0, 1]')
    return gamma

