"""
Layer Green's function on both sheets.

The kernel is split as

    G = 1/(4 pi r) - 1/(4 pi r') + (Lambda(rho, a-) - Lambda(rho, a+)) / (4 pi)
        + (1/2pi) sum_n [K0(kappa_n rho) - K0(n rho)] chi_n chi_n'
        + (i/2) sum_{n <= k} I0(-kappa_n rho) chi_n chi_n'      (second sheet, Im z < 0)

with r' the distance to the mirror image in the wall x3 = 0 and Lambda the
image-lattice part of the cosine sum sum_n K0(n rho) cos(n a). The
difference series is summed explicitly up to ``kernel_modes``; beyond that
the exact expansion

    K0(kappa_n rho) - K0(n rho) = sum_m (1/m!) (z rho / 2n)^m K_m(n rho)

is used, whose z-independent coefficients are tabulated once per point set.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from layer.conf import solver_settings
from layer.exceptions import CoincidentPointsError, DomainError, KernelRangeError
from layer.specfun import PSI_1, SheetContext, bessel_i0, kappa_n, macdonald_k0, z0_kernel

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
CHI_NORM = math.sqrt(2.0 / math.pi)
TAIL_ORDER = 8
CHUNK = 32


@dataclass(frozen=True)
class KernelEvalConfig:
    """
    n_max truncates the rank-one mode sums; kernel_modes is the number of
    explicit terms of the difference series before its analytic tail.
    """
    n_max: int
    tail_tol: float = 1e-10
    split_k: int = 1
    kernel_modes: int = None
    lattice_terms: int = 256
    tail_series_terms: int = 512
    tail_powers: int = 20

    def __post_init__(self):
        if self.n_max < self.split_k + 1:
            raise DomainError(f'n_max = {self.n_max} must exceed the window index {self.split_k}')
        if self.kernel_modes is None:
            object.__setattr__(self, 'kernel_modes', max(self.split_k + 8, 2 * self.split_k + 2))
        if self.kernel_modes < self.split_k:
            raise DomainError('kernel_modes must cover every open channel')

    @classmethod
    def for_surface(cls, surface_r_min, k, tail_tol=None, n_max=None, **options):
        """n_max = max(k + 40, ceil(-ln(tail_tol) / r_min)) unless overridden."""
        tail_tol = tail_tol or solver_settings.TAIL_TOL
        if n_max is None:
            n_max = max(k + 40, math.ceil(-math.log(tail_tol) / surface_r_min))
        options.setdefault('lattice_terms', solver_settings.LATTICE_TERMS)
        options.setdefault('tail_series_terms', solver_settings.TAIL_SERIES_TERMS)
        options.setdefault('tail_powers', solver_settings.TAIL_POWERS)
        return cls(n_max=n_max, tail_tol=tail_tol, split_k=k, **options)


def chi_n(n, x3):
    return CHI_NORM * np.sin(np.asarray(n) * np.asarray(x3, dtype=float))


def _zeta_tail(power, terms):
    """sum_{n > terms} (2 pi n)^-power"""
    return special.zeta(power, terms + 1) / TWO_PI ** power


def _legendre_scale(rho, a):
    radius = np.hypot(rho, a)
    cosine = np.divide(a, radius, out=np.zeros_like(radius), where=radius > 0)
    return radius, cosine


def lattice_sum(rho, a, terms=256):
    """
    Lambda(rho, a) = sum_n [1/sqrt((2n pi + a)^2 + rho^2) + 1/sqrt((2n pi - a)^2 + rho^2) - 2/(2n pi)],
    explicit up to ``terms`` and closed by the Legendre expansion of the
    summand in 1/(2n pi) with Hurwitz zeta remainders.
    """
    rho = np.asarray(rho, dtype=float)
    a = np.asarray(a, dtype=float)
    total = np.zeros(np.broadcast(rho, a).shape)
    rho2 = rho ** 2
    for start in range(1, terms + 1, CHUNK):
        n = np.arange(start, min(start + CHUNK, terms + 1))
        period = TWO_PI * n
        shape = (slice(None),) + (None,) * total.ndim
        period = period[shape]
        total += np.sum(1.0 / np.sqrt((period + a) ** 2 + rho2)
                        + 1.0 / np.sqrt((period - a) ** 2 + rho2) - 2.0 / period, axis=0)
    radius, cosine = _legendre_scale(rho, a)
    for j in range(2, TAIL_ORDER + 1, 2):
        total += 2.0 * radius ** j * special.eval_legendre(j, cosine) * _zeta_tail(j + 1, terms)
    return total


def k0_cosine_sum(rho, a, terms=256):
    """sum_{n >= 1} K0(n rho) cos(n a) for rho > 0 and 0 <= a < 2 pi, in closed form."""
    rho = np.asarray(rho, dtype=float)
    a = np.asarray(a, dtype=float)
    if np.any(rho <= 0):
        raise DomainError('k0_cosine_sum needs rho > 0')
    if np.any(a < 0) or np.any(a >= TWO_PI):
        raise DomainError('k0_cosine_sum needs 0 <= a < 2 pi')
    value = (math.pi / (2.0 * np.hypot(rho, a))
             + 0.5 * (np.log(rho / (4.0 * math.pi)) - PSI_1)
             + 0.5 * math.pi * lattice_sum(rho, a, terms))
    return value[()]


def _cosine_square_sum(a):
    """sum_n cos(n a) / n^2 on [0, 2 pi]"""
    return math.pi ** 2 / 6.0 - math.pi * a / 2.0 + a ** 2 / 4.0


def _swept_lattice(rho, a, terms):
    """
    Lattice part of int_0^rho s F(s, a) ds:
    sum_n sum_{b = 2n pi +- a} [sqrt(b^2 + rho^2) - b - rho^2 / (4n pi)].
    """
    total = np.zeros(np.broadcast(rho, a).shape)
    rho2 = rho ** 2
    for start in range(1, terms + 1, CHUNK):
        n = np.arange(start, min(start + CHUNK, terms + 1))
        n = n[(slice(None),) + (None,) * total.ndim]
        period = TWO_PI * n
        plus, minus = period + a, period - a
        total += np.sum(rho2 / (np.sqrt(plus ** 2 + rho2) + plus)
                        + rho2 / (np.sqrt(minus ** 2 + rho2) + minus) - rho2 / (2.0 * n * math.pi), axis=0)
    radius, cosine = _legendre_scale(rho, a)
    for j in range(4, TAIL_ORDER + 1, 2):
        coefficient = (special.eval_legendre(j - 2, cosine) - special.eval_legendre(j, cosine)) / (2 * j - 1)
        total += 2.0 * radius ** j * coefficient * _zeta_tail(j - 1, terms)
    return total


def _first_power_sum(rho, a, terms):
    """sum_{n >= 1} (rho / n) K1(n rho) cos(n a), from the cosine sum integrated in rho."""
    swept = 0.5 * math.pi * (np.hypot(rho, a) - a) + 0.5 * math.pi * _swept_lattice(rho, a, terms)
    return _cosine_square_sum(a) - swept


def _bessel_powers(x, count):
    """
    q_m(x) = (x/2)^m K_m(x) for m = 1..count by upward recurrence
    q_{m+1} = (x/2)^2 q_{m-1} + m q_m, finite at x = 0.
    """
    positive = x > 0
    safe = np.where(positive, x, 1.0)
    quarter = (safe / 2.0) ** 2
    previous = np.where(positive, quarter * special.k0(safe), 0.0)
    current = np.where(positive, 0.5 * safe * special.k1(safe), 0.5)
    quarter = np.where(positive, quarter, 0.0)
    out = np.empty((count,) + x.shape)
    out[0] = current
    for m in range(1, count):
        following = previous + m * current
        out[m] = following
        if m + 1 < count:
            previous, current = quarter * current, following
    return out


def _powers_needed(ratio, tolerance, cap):
    if ratio <= 0:
        return 1
    if ratio >= 1:
        return cap
    return int(min(cap, max(1, math.ceil(math.log(tolerance) / math.log(ratio)))))


class LayerKernel:
    """
    Layer Green's function tabulated on a fixed list of point pairs.
    Construction does the z-independent work; ``evaluate`` is cheap.
    Coincident pairs are allowed and yield the regular remainder there.
    """

    def __init__(self, x, xp, cfg, coulomb=True):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xp = np.atleast_2d(np.asarray(xp, dtype=float))
        self.cfg = cfg
        self.modes = np.arange(1, cfg.kernel_modes + 1)
        self.x3 = x[:, 2]
        self.xp3 = xp[:, 2]
        self.rho = np.hypot(x[:, 0] - xp[:, 0], x[:, 1] - xp[:, 1])
        self.a_minus = np.abs(x[:, 2] - xp[:, 2])
        self.a_plus = x[:, 2] + xp[:, 2]
        self.distance = np.hypot(self.rho, self.a_minus)
        self.coincident = self.distance == 0
        self.flat = self.rho == 0
        self.products = chi_n(self.modes[:, None], x[None, :, 2]) * chi_n(self.modes[:, None], xp[None, :, 2])
        self.static = self._static(coulomb)
        self.tail = self._tail_coefficients()

    def __len__(self):
        return len(self.rho)

    def _static(self, coulomb):
        cfg = self.cfg
        value = (lattice_sum(self.rho, self.a_minus, cfg.lattice_terms)
                 - lattice_sum(self.rho, self.a_plus, cfg.lattice_terms)) / (4.0 * math.pi)
        value -= 1.0 / (4.0 * math.pi * np.hypot(self.rho, self.a_plus))
        if coulomb:
            if np.any(self.coincident):
                raise CoincidentPointsError('the singular part is undefined at coinciding points')
            value += 1.0 / (4.0 * math.pi * self.distance)

        explicit = np.zeros_like(value)
        spread = ~self.flat
        if np.any(spread):
            explicit[spread] = -np.sum(special.k0(self.modes[:, None] * self.rho[None, spread])
                                       * self.products[:, spread], axis=0)
        if np.any(self.flat):
            explicit[self.flat] = np.sum(np.log(self.modes)[:, None] * self.products[:, self.flat], axis=0)
        return value + explicit / TWO_PI

    def _tail_coefficients(self):
        """
        B_m = sum_{n > kernel_modes} (rho / 2n)^m K_m(n rho) chi_n chi_n'.
        B_1 uses the closed form minus the explicit head; m >= 2 are summed directly.
        """
        cfg = self.cfg
        head, powers = cfg.kernel_modes, cfg.tail_powers
        z_reach = (cfg.split_k + 1) ** 2
        out = np.zeros((powers, len(self.rho)))

        lattice = cfg.lattice_terms
        full = (_first_power_sum(self.rho, self.a_minus, lattice)
                - _first_power_sum(self.rho, self.a_plus, lattice)) / TWO_PI
        head_powers = _bessel_powers(self.modes[:, None] * self.rho[None, :], 1)[0]
        out[0] = full - np.sum(head_powers / self.modes[:, None] ** 2 * self.products, axis=0)

        for n in range(head + 1, head + cfg.tail_series_terms + 1):
            count = _powers_needed(z_reach / n ** 2, cfg.tail_tol * 1e-2, powers)
            if count < 2:
                continue
            q = _bessel_powers(n * self.rho, count)
            product = chi_n(n, self.x3) * chi_n(n, self.xp3)
            scale = float(n) ** (-2 * np.arange(2, count + 1))
            out[1:count] += q[1:] * scale[:, None] * product
        return out

    def evaluate(self, z, ctx):
        """Kernel values at every pair, on the sheet selected by ctx."""
        z = complex(z)
        cfg = self.cfg
        kappa = kappa_n(z, self.modes)
        dynamic = np.zeros(len(self.rho), dtype=complex)
        spread = ~self.flat
        if np.any(spread):
            dynamic[spread] = np.sum(macdonald_k0(kappa[:, None] * self.rho[None, spread])
                                     * self.products[:, spread], axis=0)
        if np.any(self.flat):
            dynamic[self.flat] = -np.sum(np.log(kappa)[:, None] * self.products[:, self.flat], axis=0)

        ratio = abs(z) / (cfg.kernel_modes + 1) ** 2
        if ratio >= 0.5:
            raise KernelRangeError(
                f'|z| = {abs(z):.6g} is too large for {cfg.kernel_modes} explicit kernel modes'
            )
        count = _powers_needed(ratio, cfg.tail_tol * 1e-2, cfg.tail_powers)
        coefficients = np.cumprod(np.full(count, z) / np.arange(1, count + 1))
        dynamic += coefficients @ self.tail[:count]

        value = self.static + dynamic / TWO_PI
        if ctx.continues(z):
            value = value + 0.5j * np.sum(
                bessel_i0(-kappa[:ctx.k, None] * self.rho[None, :]) * self.products[:ctx.k], axis=0
            )
        return value


def layer_green(z, x, xp, ctx, cfg):
    """Green's function G(z; x, x') on the sheet of ctx."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if np.array_equal(x, xp):
        raise CoincidentPointsError('layer_green is singular at x = xp')
    return complex(LayerKernel(x, xp, cfg).evaluate(z, ctx)[0])


def omega_n(z, n, x, ctx):
    """omega_n(z; x) = K0(kappa_n |x_|) chi_n(x3) / 2 pi, through z0_kernel."""
    x = np.asarray(x, dtype=float)
    radial = np.hypot(x[..., 0], x[..., 1])
    if np.any(radial == 0):
        raise DomainError('omega_n is singular on the wire axis')
    return (z0_kernel(z, n, radial, ctx) * chi_n(n, x[..., 2]) / TWO_PI)[()]


def calibrate_tail_constant(cfg, k=None):
    """
    Empirical constant C of the residual difference-series tail: the change
    of the kernel on reference pairs when kernel_modes doubles, times
    kernel_modes / |z|.
    """
    k = k or cfg.split_k
    z = complex((k + 0.5) ** 2)
    x = np.array([[1.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 0.0, 0.7]])
    xp = np.array([[1.0, 0.0, 1.3], [1.01, 0.0, 1.0], [1.1, 0.05, 2.1]])
    ctx = SheetContext(k)
    coarse = LayerKernel(x, xp, cfg).evaluate(z, ctx)
    fine_cfg = KernelEvalConfig(
        n_max=cfg.n_max, tail_tol=cfg.tail_tol, split_k=cfg.split_k, kernel_modes=2 * cfg.kernel_modes,
        lattice_terms=cfg.lattice_terms, tail_series_terms=cfg.tail_series_terms, tail_powers=cfg.tail_powers,
    )
    fine = LayerKernel(x, xp, fine_cfg).evaluate(z, ctx)
    constant = float(np.max(np.abs(fine - coarse)) * cfg.kernel_modes / abs(z))
    if constant * abs(z) / cfg.kernel_modes > cfg.tail_tol:
        logger.warning('kernel tail residual %.3g exceeds tail_tol %.3g', constant * abs(z) / cfg.kernel_modes,
                       cfg.tail_tol)
    return constant
