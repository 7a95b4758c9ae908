"""
    Degenerate three-wave-mixing phase conjugation in the undepleted-pump limit.

    Probe A = E_pw* and conjugate C = E_c obey
        dA/dz =  i g  C exp(+i dk z)
        dC/dz = -i g* A exp(-i dk z)
    with C(0) = 0. The closed-form output ratio C(L)/A(0) is the amplification factor.
"""
import cmath
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from physics.errors import FrequencyOrder, StepTooLarge

DEFAULT_STEPS = 1024
MIN_STEPS = 16
# below this |b L / 2| the sinh(bL/2)/b factor is taken from its series
SERIES_THRESHOLD = 1e-6


@dataclass(frozen=True)
class TwmParams:
    g: complex
    delta_k: float
    L: float
    step: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'g', complex(self.g))
        object.__setattr__(self, 'delta_k', float(self.delta_k))
        if self.L < 0:
            raise ValueError(f'interaction length must be non-negative, got {self.L}')
        if self.step is None:
            object.__setattr__(self, 'step', self.L / DEFAULT_STEPS)

    def validate(self):
        if not self.L > 0:
            raise ValueError(f'interaction length must be positive, got {self.L}')
        if not self.step > 0:
            raise ValueError(f'integrator step must be positive, got {self.step}')
        if self.step > self.L / MIN_STEPS * (1 + 1e-12):
            raise StepTooLarge(f'step {self.step} exceeds L/{MIN_STEPS} = {self.L / MIN_STEPS}')


@dataclass(frozen=True)
class FieldTrajectory:
    z: np.ndarray
    e_pw: np.ndarray
    e_c: np.ndarray

    def __post_init__(self):
        if not (len(self.z) == len(self.e_pw) == len(self.e_c)):
            raise ValueError('trajectory arrays must have equal lengths')
        for arr in (self.z, self.e_pw, self.e_c):
            arr.setflags(write=False)

    @property
    def manley_rowe(self) -> np.ndarray:
        """ |e_pw|^2 - |e_c|^2 at every sample. """
        return np.abs(self.e_pw) ** 2 - np.abs(self.e_c) ** 2

    @property
    def manley_rowe_drift(self) -> float:
        invariant = self.manley_rowe
        return float(np.max(np.abs(invariant - invariant[0])))

    def output_ratio(self) -> complex:
        """ e_c(L) / e_pw*(0). """
        return complex(self.e_c[-1] / np.conj(self.e_pw[0]))


def conjugate_wave_params(omega_p: float, omega_pw: float, k_p: Sequence[float],
                          k_pw: Sequence[float]) -> Tuple[float, np.ndarray]:
    """ Frequency and wavevector of the phase-coherent conjugate wave. """
    if omega_pw >= omega_p:
        raise FrequencyOrder(f'probe omega {omega_pw} must be below pump omega {omega_p}')
    return omega_p - omega_pw, np.asarray(k_p, dtype=float) - np.asarray(k_pw, dtype=float)


def phase_mismatch(k_p: Sequence[float], k_pw: Sequence[float], k_c: Sequence[float]) -> float:
    """ Collinear mismatch: z projection of k_p - k_pw - k_c. """
    return float((np.asarray(k_p, dtype=float) - np.asarray(k_pw, dtype=float) - np.asarray(k_c, dtype=float))[2])


def _sinh_ratio(b: complex, L: float) -> complex:
    """ sinh(b L / 2) / b, continued through b = 0. """
    x = b * L / 2
    if abs(x) < SERIES_THRESHOLD:
        return L / 2 * (1 + x ** 2 / 6 + x ** 4 / 120)
    return cmath.sinh(x) / b


def amplification_factor(params: TwmParams) -> complex:
    g, dk, L = params.g, params.delta_k, params.L
    b = cmath.sqrt(4 * abs(g) ** 2 - dk ** 2)
    return -2j * g.conjugate() * _sinh_ratio(b, L) * cmath.exp(-1j * dk * L / 2)


def _rk4_matrix(g: complex, dk: float, h: float) -> np.ndarray:
    """ One classical RK4 step of the co-rotating system as a 2x2 propagator. """
    m = np.array([[-0.5j * dk, 1j * g],
                  [-1j * g.conjugate(), 0.5j * dk]])
    eye = np.eye(2, dtype=complex)
    hm = h * m
    hm2 = hm @ hm
    hm3 = hm2 @ hm
    hm4 = hm3 @ hm
    return eye + hm + hm2 / 2 + hm3 / 6 + hm4 / 24


def integrate_twm(params: TwmParams, e_pw0: complex) -> FieldTrajectory:
    """
    Fixed-step fourth-order integration from z = 0 to L with e_c(0) = 0.
    The step is shrunk so an integer number of steps spans L exactly.
    """
    params.validate()
    n_steps = int(np.ceil(params.L / params.step - 1e-9))
    h = params.L / n_steps
    z = np.linspace(0., params.L, n_steps + 1)
    z[-1] = params.L
    propagator = _rk4_matrix(params.g, params.delta_k, h)
    state = np.empty((n_steps + 1, 2), dtype=complex)
    state[0] = (np.conj(complex(e_pw0)), 0j)
    for j in range(n_steps):
        state[j + 1] = propagator @ state[j]
    # back from the co-rotating frame
    a = state[:, 0] * np.exp(0.5j * params.delta_k * z)
    c = state[:, 1] * np.exp(-0.5j * params.delta_k * z)
    return FieldTrajectory(z=z, e_pw=np.conj(a), e_c=c)


def gain_threshold(g: complex, L: float) -> bool:
    """ True when the conjugate wave is amplified: |g| L > pi / 4. """
    if not L > 0:
        raise ValueError(f'crystal length must be positive, got {L}')
    return abs(g) * L > np.pi / 4


def threshold_length(g: complex) -> float:
    if g == 0:
        return np.inf
    return np.pi / (4 * abs(g))


def ode_relative_error(params: TwmParams, e_pw0: complex = 1.0) -> float:
    af = amplification_factor(params)
    ratio = integrate_twm(params, e_pw0).output_ratio()
    return abs(ratio - af) / max(abs(af), 1e-12)


def amplification_sweep(g_abs: Sequence[float], delta_k: Sequence[float], lengths: Sequence[float],
                        g_phase: float = 0.0, steps: int = DEFAULT_STEPS) -> pd.DataFrame:
    """ Amplification factor and its ODE cross-check over a (|g|, dk, L) grid. """
    rows = []
    for g_mag in g_abs:
        g = g_mag * cmath.exp(1j * g_phase)
        for dk in delta_k:
            for L in lengths:
                params = TwmParams(g=g, delta_k=dk, L=L, step=L / steps if L > 0 else None)
                af = amplification_factor(params)
                err = ode_relative_error(params) if L > 0 else 0.0
                rows.append({'g_abs': g_mag, 'delta_k': dk, 'L': L,
                             'af_re': af.real, 'af_im': af.imag, 'af_abs': abs(af),
                             'ode_rel_err': err})
    return pd.DataFrame(rows, columns=['g_abs', 'delta_k', 'L', 'af_re', 'af_im', 'af_abs', 'ode_rel_err'])
