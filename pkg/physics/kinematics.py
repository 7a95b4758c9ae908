"""
    Pair kinematics of down-conversion: conservation laws, emission cone angles,
    the coherence (phase-velocity) condition and the photon transforms of the
    crossing-symmetric processes

        p -> s + i,    p + s_bar -> i,    p + i_bar -> s

    Vectors are 3-component (x, y, z); the pump axis is usually z.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import constants

from physics.errors import PhaseMatchImpossible, OutOfDispersionRange, FrequencyOrder

SPEED_OF_LIGHT = constants.c
# tolerance on the law-of-cosines arguments before they count as outside [-1, 1]
COSINE_SLACK = 1e-12


def speed_of_light(natural_units: bool) -> float:
    return 1.0 if natural_units else SPEED_OF_LIGHT


@dataclass(frozen=True)
class Photon:
    omega: float
    k: Tuple[float, float, float]
    helicity: int = 1

    def __post_init__(self):
        k = tuple(float(v) for v in self.k)
        if len(k) != 3:
            raise ValueError(f'k must have 3 components, got {len(k)}')
        object.__setattr__(self, 'k', k)
        if not self.omega > 0:
            raise ValueError(f'omega must be positive, got {self.omega}')
        if not np.linalg.norm(k) > 0:
            raise ValueError('|k| must be positive')
        if self.helicity not in (-1, 1):
            raise ValueError(f'helicity must be -1 or +1, got {self.helicity}')

    @classmethod
    def vacuum(cls, omega: float, direction: Sequence[float], helicity: int = 1, c: float = SPEED_OF_LIGHT):
        """ Photon travelling along `direction` with |k| = omega / c. """
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        return cls(omega=omega, k=tuple(direction * (omega / c)), helicity=helicity)

    @property
    def k_vec(self) -> np.ndarray:
        return np.array(self.k)

    @property
    def k_abs(self) -> float:
        return float(np.linalg.norm(self.k))


@dataclass(frozen=True)
class CrystalMedium:
    """
    Dispersion table omega -> Re n(omega) (linear interpolation, no extrapolation),
    effective coupling g (1/m) and thickness L (m).
    """
    omegas: Tuple[float, ...]
    indices: Tuple[float, ...]
    g: complex = 0j
    L: float = 1e-3
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        omegas = tuple(float(w) for w in self.omegas)
        indices = tuple(float(n) for n in self.indices)
        object.__setattr__(self, 'omegas', omegas)
        object.__setattr__(self, 'indices', indices)
        object.__setattr__(self, 'g', complex(self.g))
        if len(omegas) < 2 or len(omegas) != len(indices):
            raise ValueError('dispersion table needs at least 2 (omega, n) entries')
        if np.any(np.diff(omegas) <= 0):
            raise ValueError('dispersion table omegas must be strictly increasing')
        if min(indices) < 1:
            raise ValueError('dispersion table contains Re n < 1')
        if not self.L > 0:
            raise ValueError(f'crystal thickness must be positive, got {self.L}')
        if not self.c > 0:
            raise ValueError(f'speed of light must be positive, got {self.c}')

    @classmethod
    def constant(cls, n: float = 1.0, g: complex = 0j, L: float = 1e-3, c: float = SPEED_OF_LIGHT,
                 omega_max: float = 1e20):
        return cls(omegas=(0.0, omega_max), indices=(n, n), g=g, L=L, c=c)

    @classmethod
    def from_file(cls, path: Union[str, Path], g: complex = 0j, L: float = 1e-3, c: float = SPEED_OF_LIGHT):
        """ Reads a two-column `omega<TAB>n` table; '#' starts a comment. """
        table = np.loadtxt(str(path), comments='#', ndmin=2)
        if table.shape[1] != 2:
            raise ValueError(f'{path}: expected 2 columns, found {table.shape[1]}')
        return cls(omegas=tuple(table[:, 0]), indices=tuple(table[:, 1]), g=g, L=L, c=c)

    def index(self, omega):
        omega_arr = np.asarray(omega, dtype=float)
        if np.any(omega_arr < self.omegas[0]) or np.any(omega_arr > self.omegas[-1]):
            raise OutOfDispersionRange(
                f'omega={omega} outside the dispersion table [{self.omegas[0]}, {self.omegas[-1]}]')
        n = np.interp(omega_arr, self.omegas, self.indices)
        return float(n) if n.ndim == 0 else n

    def wavenumber(self, omega):
        return self.index(omega) * np.asarray(omega, dtype=float) / self.c


@dataclass(frozen=True)
class PairState:
    signal: Photon
    idler: Photon
    theta_ps: float
    theta_pi: float

    @property
    def omega(self) -> float:
        return self.signal.omega + self.idler.omega

    @property
    def k(self) -> np.ndarray:
        return self.signal.k_vec + self.idler.k_vec


def emission_angles(k_p: float, k_s: float, k_i: float) -> Tuple[float, float]:
    """ Emission angles of signal and idler with respect to the pump from the law of cosines. """
    if not (k_p > 0 and k_s > 0 and k_i > 0):
        raise ValueError(f'wavenumbers must be positive, got ({k_p}, {k_s}, {k_i})')
    cos_ps = (k_p ** 2 + k_s ** 2 - k_i ** 2) / (2 * k_p * k_s)
    cos_pi = (k_p ** 2 + k_i ** 2 - k_s ** 2) / (2 * k_p * k_i)
    for cos in (cos_ps, cos_pi):
        if abs(cos) > 1 + COSINE_SLACK:
            raise PhaseMatchImpossible(f'no emission cone for k=({k_p}, {k_s}, {k_i}): cos={cos}')
    return float(np.arccos(np.clip(cos_ps, -1, 1))), float(np.arccos(np.clip(cos_pi, -1, 1)))


def transverse_basis(axis) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ Orthonormal (e1, e2, e3) with e3 along `axis`. """
    e3 = np.asarray(axis, dtype=float)
    e3 = e3 / np.linalg.norm(e3)
    helper = np.array([1., 0., 0.]) if abs(e3[0]) < 0.9 else np.array([0., 1., 0.])
    e1 = helper - np.dot(helper, e3) * e3
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def split_pump(pump: Photon, omega_s: float, medium: CrystalMedium, azimuth: float = 0.0) -> PairState:
    """
    Direct down-conversion of `pump` into a signal at omega_s and the complementary idler.
    The signal leaves on the emission cone at `azimuth` about the pump axis; the idler
    wavevector is the momentum balance, so conservation holds to rounding.
    """
    if not 0 < omega_s < pump.omega:
        raise FrequencyOrder(f'signal frequency {omega_s} must lie in (0, {pump.omega})')
    omega_i = pump.omega - omega_s
    k_p = pump.k_vec
    k_p_abs = pump.k_abs
    k_s_abs = medium.wavenumber(omega_s)
    k_i_abs = medium.wavenumber(omega_i)
    theta_ps, theta_pi = emission_angles(k_p_abs, k_s_abs, k_i_abs)
    e1, e2, e3 = transverse_basis(k_p)
    radial = np.cos(azimuth) * e1 + np.sin(azimuth) * e2
    k_s = k_s_abs * (np.cos(theta_ps) * e3 + np.sin(theta_ps) * radial)
    k_i = k_p - k_s
    signal = Photon(omega=omega_s, k=tuple(k_s), helicity=pump.helicity)
    idler = Photon(omega=omega_i, k=tuple(k_i), helicity=-pump.helicity)
    return PairState(signal=signal, idler=idler, theta_ps=theta_ps, theta_pi=theta_pi)


def phase_velocity(medium: CrystalMedium, omega: float) -> float:
    return medium.c / medium.index(omega)


def check_coherence(medium: CrystalMedium, omega_p: float, omega_f: float) -> bool:
    """
    Cherenkov-like coherence: the pump phase front keeps up with the fluorescence,
    v(omega_p) >= v(omega_f), i.e. Re n(omega_p) <= Re n(omega_f).
    """
    return phase_velocity(medium, omega_p) >= phase_velocity(medium, omega_f)


def conjugate_wavevectors(k: np.ndarray, helicity):
    """ Phase-conjugation on arrays: k -> -k, helicity -> -helicity. """
    return -np.asarray(k), -np.asarray(helicity)


def conjugate_photon(p: Photon) -> Photon:
    k, helicity = conjugate_wavevectors(p.k_vec, p.helicity)
    return Photon(omega=p.omega, k=tuple(k), helicity=int(helicity))


def cross_convert_wavevectors(pump_omega, pump_k, returned_omega, returned_k):
    """
    Array form of p + x_bar -> y. Shapes broadcast: k arrays have a trailing axis of 3.
    Returns (omega_out, k_out).
    """
    pump_omega = np.asarray(pump_omega, dtype=float)
    returned_omega = np.asarray(returned_omega, dtype=float)
    if np.any(returned_omega >= pump_omega):
        raise FrequencyOrder('returned photon frequency must be below the pump frequency')
    return pump_omega - returned_omega, np.asarray(pump_k) + np.asarray(returned_k)


def cross_convert(pump: Photon, returned: Photon) -> Photon:
    """
    Crossing-symmetric conversion of a returned (conjugated) photon by the pump.
    `returned` is the s_bar (or i_bar) leg travelling back into the crystal; the output
    is the complementary photon leaving the crystal. Helicity follows the returned leg.
    """
    if returned.omega >= pump.omega:
        raise FrequencyOrder(f'returned omega {returned.omega} must be below pump omega {pump.omega}')
    omega, k = cross_convert_wavevectors(pump.omega, pump.k_vec, returned.omega, returned.k_vec)
    return Photon(omega=float(omega), k=tuple(k), helicity=returned.helicity)


def conservation_residual(pump_omega, pump_k, signal_omega, signal_k, idler_omega, idler_k) -> Tuple[float, float]:
    """ Relative energy and (max per component) momentum residuals of p = s + i. """
    pump_k = np.asarray(pump_k, dtype=float)
    omega_res = np.max(np.abs(np.asarray(pump_omega) - np.asarray(signal_omega) - np.asarray(idler_omega))
                       / np.abs(pump_omega))
    scale = np.max(np.abs(pump_k), axis=-1, keepdims=True)
    k_res = np.max(np.abs(pump_k - np.asarray(signal_k) - np.asarray(idler_k)) / scale)
    return float(omega_res), float(k_res)
