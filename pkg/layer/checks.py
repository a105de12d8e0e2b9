"""
Built-in identity checks run by ``manage.py layer validate``.

Every check returns the largest error it saw and the bound that error must
stay under.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from layer.exceptions import SolverError
from layer.greens import KernelEvalConfig, k0_cosine_sum, layer_green
from layer.specfun import Sheet, SheetContext, SpectralParams, gamma_n, gamma_n_derivative, z0_kernel

logger = logging.getLogger(__name__)

REGISTRY = []
BRUTE_FORCE_TERMS = 100000
WEDGE_OFFSET = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    bound: float
    message: str = ''

    @property
    def passed(self):
        return math.isfinite(self.error) and self.error < self.bound


def check(name, bound):
    def register(func):
        REGISTRY.append((name, bound, func))
        return func
    return register


@check('embedded_zero', 1e-12)
def embedded_zero():
    """Gamma_n vanishes at xi_alpha + n^2."""
    ctx = SheetContext(1)
    worst = 0.0
    for alpha in (-1.0, 0.0, 0.5, 2.0):
        params = SpectralParams(alpha, 1.0)
        for n in range(1, 21):
            worst = max(worst, abs(gamma_n(params.epsilon(n), n, ctx, params, detuning=params.xi_alpha)))
    return worst


@check('k0_cosine_identity', 1e-8)
def k0_cosine_identity():
    """Closed-form sum_n K0(n rho) cos(n a) against direct partial sums."""
    n = np.arange(1, BRUTE_FORCE_TERMS + 1, dtype=float)
    worst = 0.0
    for rho in (0.01, 0.1, 0.5, 1.0):
        decay = special.k0(n * rho)
        for a in (0.0, 0.5, 1.0, 2.0, 3.0):
            direct = float(np.sum(decay * np.cos(n * a)))
            worst = max(worst, abs(k0_cosine_sum(rho, a) - direct))
    return worst


@check('gamma_edge_of_wedge', 1e-8)
def gamma_edge_of_wedge():
    """Gamma_n from above on the first sheet meets its second-sheet continuation from below."""
    params = SpectralParams(0.0, 1.0)
    worst = 0.0
    for energy in (2.5, 6.0):
        first = SheetContext.for_energy(energy, Sheet.FIRST)
        second = first.second()
        for n in range(1, 6):
            above = gamma_n(energy + 1j * WEDGE_OFFSET, n, first, params)
            below = gamma_n(energy - 1j * WEDGE_OFFSET, n, second, params)
            worst = max(worst, abs(above - below))
    return worst


@check('z0_edge_of_wedge', 1e-6)
def z0_edge_of_wedge():
    """The continued Z0 kernel is continuous across the cut."""
    worst = 0.0
    for energy in (2.5, 6.0):
        first = SheetContext.for_energy(energy, Sheet.FIRST)
        for rho in (0.3, 1.0, 2.5):
            for n in range(1, first.k + 1):
                above = z0_kernel(energy + 1j * WEDGE_OFFSET, n, rho, first)
                below = z0_kernel(energy - 1j * WEDGE_OFFSET, n, rho, first.second())
                worst = max(worst, abs(above - below))
    return worst


@check('green_edge_of_wedge', 1e-6)
def green_edge_of_wedge():
    """The layer Green's function continues across the cut at random point pairs."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for energy in (2.5, 6.0):
        first = SheetContext.for_energy(energy, Sheet.FIRST)
        cfg = KernelEvalConfig(n_max=first.k + 40, split_k=first.k)
        for _ in range(5):
            x = np.array([rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(0.3, 2.8)])
            xp = np.array([rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0), rng.uniform(0.3, 2.8)])
            above = layer_green(energy + 1j * WEDGE_OFFSET, x, xp, first, cfg)
            below = layer_green(energy - 1j * WEDGE_OFFSET, x, xp, first.second(), cfg)
            worst = max(worst, abs(above - below))
    return worst


@check('green_symmetry', 1e-12)
def green_symmetry():
    """G(z; x, x') = G(z; x', x)."""
    ctx = SheetContext(1)
    cfg = KernelEvalConfig(n_max=41, split_k=1)
    x = np.array([1.0, 0.2, 1.1])
    xp = np.array([0.7, -0.4, 2.0])
    worst = 0.0
    for z in (2.5 + 0.1j, 3.0 - 0.2j, -1.0):
        forward = layer_green(z, x, xp, ctx, cfg)
        backward = layer_green(z, xp, x, ctx, cfg)
        worst = max(worst, abs(forward - backward) / max(1.0, abs(forward)))
    return worst


@check('derivative_law', 1e-8)
def derivative_law():
    """dGamma_l/dz at epsilon_l is 1/(4 pi xi_alpha)."""
    params = SpectralParams(0.0, 1.0)
    expected = 1.0 / (4.0 * math.pi * params.xi_alpha)
    h = 1e-5
    worst = 0.0
    for l in (2, 3):
        energy = params.epsilon(l)
        ctx = SheetContext.for_energy(energy, Sheet.FIRST)
        slope = (gamma_n(energy + h, l, ctx, params) - gamma_n(energy - h, l, ctx, params)) / (2 * h)
        worst = max(worst, abs(slope - expected), abs(gamma_n_derivative(energy, l) - expected))
    return worst


def run_checks(names=None):
    results = []
    for name, bound, func in REGISTRY:
        if names and name not in names:
            continue
        try:
            error = float(func())
            message = ''
        except SolverError as exc:
            logger.warning('check %s raised %s', name, exc)
            error, message = math.inf, str(exc)
        results.append(CheckResult(name, error, bound, message))
        logger.info('check %s: error %.3g (bound %.3g)', name, error, bound)
    return results
