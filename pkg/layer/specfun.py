import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from layer.exceptions import BranchPointError, DomainError, ThresholdCollisionError

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
PSI_1 = -EULER_GAMMA
K0_UNDERFLOW = 700.0
THRESHOLD_GAP = 1e-8


class Sheet(enum.Enum):
    FIRST = 'first'
    SECOND = 'second'


@dataclass(frozen=True)
class SpectralParams:
    """
    Wire coupling alpha, surface coupling beta and the derived
    point-interaction eigenvalue xi_alpha < 0.
    """
    alpha: float
    beta: float
    xi_alpha: float = field(init=False)

    def __post_init__(self):
        if self.beta == 0:
            raise DomainError('beta must be non-zero: a vanishing surface coupling has no resonance')
        object.__setattr__(self, 'xi_alpha', -4.0 * math.exp(2.0 * (-2.0 * math.pi * self.alpha + PSI_1)))

    def epsilon(self, n):
        return self.xi_alpha + n * n

    def window(self, n):
        """
        Window index k with epsilon_n in (k^2, (k+1)^2), or None for a
        discrete eigenvalue below the first threshold.
        """
        energy = self.epsilon(n)
        if energy < 1:
            return None
        k = math.isqrt(int(math.floor(energy)))
        for threshold in (k * k, (k + 1) * (k + 1)):
            if abs(energy - threshold) < THRESHOLD_GAP:
                raise ThresholdCollisionError(
                    f'epsilon_{n} = {energy!r} collides with the threshold {threshold}'
                )
        return k


@dataclass(frozen=True)
class SheetContext:
    k: int
    sheet: Sheet = Sheet.FIRST

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f'window index must be >= 1, got {self.k}')

    @classmethod
    def for_energy(cls, energy, sheet=Sheet.SECOND):
        if energy <= 1:
            raise DomainError(f'energy {energy!r} lies below the continuum, no window')
        return cls(k=math.isqrt(int(math.floor(energy))), sheet=sheet)

    @property
    def window(self):
        return (self.k ** 2, (self.k + 1) ** 2)

    def contains(self, energy):
        low, high = self.window
        return low < energy < high

    def continues(self, z):
        """True where the second-sheet corrections are active."""
        return self.sheet is Sheet.SECOND and complex(z).imag < 0

    def open_channels(self, n):
        return np.asarray(n) <= self.k

    def second(self):
        return SheetContext(self.k, Sheet.SECOND)


def _as_complex(w):
    return np.asarray(w, dtype=complex)


def macdonald_k0(w):
    """
    K_0 on the principal branch; exact zero once Re w > 700.
    Accepts scalars or arrays.
    """
    w = _as_complex(w)
    if np.any(w == 0):
        raise DomainError('K0 has a logarithmic singularity at w = 0')
    out = np.zeros_like(w)
    live = w.real <= K0_UNDERFLOW
    out[live] = special.kv(0, w[live])
    return out[()]


def bessel_i0(w):
    return special.iv(0, _as_complex(w))[()]


def kappa_n(z, n, detuning=None):
    """
    kappa_n(z) = -i sqrt(z - n^2) with Im sqrt > 0, so Re kappa > 0 off
    [n^2, inf). Real z above the threshold takes the +i0 boundary value.
    A known detuning z - n^2 is used as given instead of being recomputed.
    """
    n = np.asarray(n)
    if detuning is None:
        d = complex(z) - n.astype(float) ** 2
    else:
        d = np.broadcast_to(np.asarray(detuning, dtype=complex), n.shape)
    if np.any(d == 0):
        raise BranchPointError(f'z = {z!r} is a threshold n^2')
    root = np.sqrt(_as_complex(d))
    root = np.where(root.imag < 0, -root, root)
    return (-1j * root)[()]


def gamma_n(z, n, ctx, params, detuning=None):
    """
    Gamma_n(z) = (2 pi alpha - psi(1) + ln(kappa_n / 2)) / 2 pi.
    On the second sheet below the axis the open channels n <= k lose i/2.
    """
    kappa = kappa_n(z, n, detuning)
    value = (2.0 * math.pi * params.alpha - PSI_1 + np.log(kappa / 2.0)) / (2.0 * math.pi)
    if ctx.continues(z):
        value = value - 0.5j * ctx.open_channels(n)
    return value[()] if isinstance(value, np.ndarray) else value


def gamma_n_derivative(z, n, detuning=None):
    """dGamma_n/dz = 1 / (4 pi (z - n^2)); the sheet shift is constant so both sheets agree."""
    if detuning is None:
        d = np.asarray(complex(z) - np.asarray(n, dtype=float) ** 2)
    else:
        d = np.asarray(detuning, dtype=complex)
    if np.any(d == 0):
        raise BranchPointError(f'z = {z!r} is a threshold n^2')
    return (1.0 / (4.0 * math.pi * d))[()]


def z0_kernel(z, n, rho, ctx):
    """K_0(kappa_n rho), plus i pi I_0(-kappa_n rho) for open channels below the cut."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise DomainError('z0_kernel needs rho > 0')
    arg = kappa_n(z, n) * rho
    value = macdonald_k0(arg)
    if ctx.continues(z):
        value = value + 1j * math.pi * bessel_i0(-arg) * ctx.open_channels(n)
    return value[()] if isinstance(value, np.ndarray) else value
