"""
    Thin-crystal pair source: pairs are born at the same transverse position inside the
    pump spot with anticorrelated transverse wavevectors (plus the share of the pump's own
    transverse wavevector when the pump has a finite waist).
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from physics.errors import ConfigInvalid
from physics.kinematics import CrystalMedium, Photon, SPEED_OF_LIGHT


@dataclass(frozen=True)
class SourceModel:
    pump_omega: float
    sigma_q: Optional[float]
    seed: int
    pump_waist: Optional[float] = None
    signal_fraction: float = 0.5
    helicity: int = 1
    c: float = SPEED_OF_LIGHT
    medium: Optional[CrystalMedium] = None

    def __post_init__(self):
        if not self.pump_omega > 0:
            raise ValueError(f'pump omega must be positive, got {self.pump_omega}')
        if self.sigma_q is not None and not self.sigma_q > 0:
            raise ValueError(f'sigma_q must be positive, got {self.sigma_q}')
        if self.pump_waist is not None and not self.pump_waist > 0:
            raise ValueError(f'pump waist must be positive, got {self.pump_waist}')
        if not 0 < self.signal_fraction < 1:
            raise ValueError(f'signal_fraction must lie in (0, 1), got {self.signal_fraction}')
        if self.medium is None:
            object.__setattr__(self, 'medium', CrystalMedium.constant(c=self.c))

    @property
    def omega_s(self) -> float:
        return self.pump_omega * self.signal_fraction

    @property
    def omega_i(self) -> float:
        return self.pump_omega - self.omega_s

    def rng(self, shard: int = 0) -> np.random.Generator:
        """ Independent generator for a shard, derived from (seed, shard). """
        return np.random.default_rng(np.random.SeedSequence([int(self.seed), int(shard)]))


@dataclass
class PairBatch:
    y0: np.ndarray
    pump_k: np.ndarray
    signal_k: np.ndarray
    idler_k: np.ndarray
    omega_p: float
    omega_s: float
    omega_i: float

    def __len__(self):
        return len(self.y0)

    @property
    def signal_slope(self) -> np.ndarray:
        return self.signal_k[:, 0] / self.signal_k[:, 2]

    @property
    def idler_slope(self) -> np.ndarray:
        return self.idler_k[:, 0] / self.idler_k[:, 2]

    def subset(self, index) -> 'PairBatch':
        return PairBatch(y0=self.y0[index], pump_k=self.pump_k[index], signal_k=self.signal_k[index],
                         idler_k=self.idler_k[index], omega_p=self.omega_p, omega_s=self.omega_s,
                         omega_i=self.omega_i)


def sample_pairs(src: SourceModel, rng: np.random.Generator, n: int) -> PairBatch:
    """ Vectorised pair sampling; k_s + k_i = k_p holds by construction. """
    if src.sigma_q is None:
        raise ConfigInvalid('pair sampling needs a transverse-momentum spread sigma_q')
    omega_p, omega_s, omega_i = src.pump_omega, src.omega_s, src.omega_i
    k_p_abs = src.medium.wavenumber(omega_p)
    k_s_abs = src.medium.wavenumber(omega_s)
    if src.pump_waist is None:
        y0 = np.zeros(n)
        q_pump = np.zeros(n)
    else:
        y0 = rng.normal(0., src.pump_waist / 2, n)
        q_pump = rng.normal(0., 1 / src.pump_waist, n)
    q = rng.normal(0., src.sigma_q, n)
    pump_k = np.zeros((n, 3))
    pump_k[:, 0] = q_pump
    pump_k[:, 2] = np.sqrt(k_p_abs ** 2 - q_pump ** 2)
    signal_k = np.zeros((n, 3))
    signal_k[:, 0] = q_pump * (omega_s / omega_p) + q
    signal_k[:, 2] = np.sqrt(k_s_abs ** 2 - signal_k[:, 0] ** 2)
    idler_k = pump_k - signal_k
    return PairBatch(y0=y0, pump_k=pump_k, signal_k=signal_k, idler_k=idler_k,
                     omega_p=omega_p, omega_s=omega_s, omega_i=omega_i)


def sample_pair(src: SourceModel, rng: np.random.Generator) -> Tuple[Photon, Photon]:
    batch = sample_pairs(src, rng, 1)
    signal = Photon(omega=batch.omega_s, k=tuple(batch.signal_k[0]), helicity=src.helicity)
    idler = Photon(omega=batch.omega_i, k=tuple(batch.idler_k[0]), helicity=-src.helicity)
    return signal, idler
