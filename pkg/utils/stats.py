from typing import Tuple

import numpy as np
from scipy import stats
from scipy.optimize import curve_fit

from physics.diffraction import sinc_squared
from physics.errors import InsufficientCounts

MIN_EXPECTED = 5


def flatness_test(singles) -> float:
    """ Chi-square p-value of the per-bin counts against a uniform distribution. """
    counts = np.asarray(singles, dtype=float)
    if len(counts) < 2 or counts.mean() < MIN_EXPECTED:
        raise InsufficientCounts(f'need >= {MIN_EXPECTED} expected counts per bin, have {counts.mean() if len(counts) else 0}')
    return float(stats.chisquare(counts).pvalue)


def compare_histograms(first, second) -> float:
    """ Chi-square homogeneity p-value of two count vectors over the same bins. """
    table = np.vstack([np.asarray(first, dtype=float), np.asarray(second, dtype=float)])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False)[1])


def max_poisson_deviation(observed, expected) -> float:
    """ Largest |observed - expected| in units of sqrt(max(expected, 1)). """
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return float(np.max(np.abs(observed - expected) / np.sqrt(np.maximum(expected, 1.))))


def bin_averaged_sinc_squared(centers, pitch: float, a: float, wavelength: float, z2: float,
                              oversample: int = 16) -> np.ndarray:
    offsets = ((np.arange(oversample) + 0.5) / oversample - 0.5) * pitch
    x = np.asarray(centers, dtype=float)[:, None] + offsets[None, :]
    return sinc_squared(np.pi * a * x / (wavelength * z2)).mean(axis=1)


def fit_sinc_squared(x, counts, wavelength: float, z2: float, a_guess: float) -> Tuple[float, float]:
    """ Least-squares fit of amplitude * sinc^2(pi a x / (lambda z2)); returns (a, amplitude). """
    x = np.asarray(x, dtype=float)
    counts = np.asarray(counts, dtype=float)

    def model(x_, amplitude, a):
        return amplitude * sinc_squared(np.pi * a * x_ / (wavelength * z2))

    sigma = np.sqrt(np.maximum(counts, 1.))
    popt, _ = curve_fit(model, x, counts, p0=[max(counts.max(), 1.), a_guess], sigma=sigma)
    return float(abs(popt[1])), float(popt[0])
