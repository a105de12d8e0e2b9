import cmath
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from layer.bs_operator import (
    ResonanceSystem, assemble_free, bs_determinant, evaluate_eta, mode_matrix, mode_vector, pairing,
)
from layer.conf import solver_settings
from layer.exceptions import ConvergenceError, DomainError, FitError, SolverError
from layer.geometry import scale_surface
from layer.greens import chi_n
from layer.specfun import PSI_1, SheetContext, gamma_n

logger = logging.getLogger(__name__)

SHEET_SLACK = 1e-12
MULLER_OFFSET = 1e-3
LEVEL_TOL = 1e-12


@dataclass(frozen=True)
class EigenvalueEntry:
    n: int
    energy: float
    classification: str
    window: Optional[int]


@dataclass(frozen=True)
class PoleResult:
    z: complex
    mu: complex
    l: int
    k: int
    delta: float
    residual: float
    iterations: int
    method: str
    condition_free: float
    condition_inner: float
    n_max: int

    @property
    def width(self):
        return -2.0 * self.z.imag


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float


@dataclass(frozen=True)
class SweepPoint:
    delta: float
    pole: Optional[PoleResult]
    closed_form_im: Optional[float]
    status: str = 'ok'
    message: str = ''

    @property
    def mu(self):
        return self.pole.mu if self.pole else None


@dataclass(frozen=True)
class SweepResult:
    l: int
    points: List[SweepPoint]
    fit_im: Optional[PowerLawFit] = None
    fit_re: Optional[PowerLawFit] = None
    closed_form_im: List[Optional[float]] = field(default_factory=list)

    @property
    def converged(self):
        return [point for point in self.points if point.pole is not None]


def embedded_eigenvalues(params, n_range):
    """
    epsilon_n = xi_alpha + n^2 for n in n_range (an int N means 1..N), each
    cross-checked against Gamma_n(epsilon_n) = 0.
    """
    if isinstance(n_range, int):
        n_range = range(1, n_range + 1)
    ctx = SheetContext(1)
    entries = []
    for n in n_range:
        energy = params.epsilon(n)
        residual = abs(gamma_n(energy, n, ctx, params, detuning=params.xi_alpha))
        if residual > LEVEL_TOL:
            raise SolverError(f'|Gamma_{n}(epsilon_{n})| = {residual:.3e} exceeds {LEVEL_TOL:g}')
        window = params.window(n)
        entries.append(EigenvalueEntry(
            n=n,
            energy=energy,
            classification='discrete' if window is None else 'embedded',
            window=window,
        ))
    return entries


def newton(func, seed, tol, max_iterations, step_scale):
    """Complex Newton iteration with a central-difference derivative."""
    z = complex(seed)
    step = None
    for iteration in range(max_iterations + 1):
        value = func(z)
        if abs(value) < tol and (step is None or abs(step) < tol):
            return z, value, iteration
        if iteration == max_iterations:
            break
        h = step_scale * max(1.0, abs(z))
        slope = (func(z + h) - func(z - h)) / (2.0 * h)
        if slope == 0:
            raise ConvergenceError('Newton derivative vanished', last=z, iterations=iteration)
        step = value / slope
        z -= step
        logger.debug('newton %d: z = %r, |f| = %.3e', iteration + 1, z, abs(value))
    raise ConvergenceError(f'Newton did not converge in {max_iterations} iterations', last=z,
                           iterations=max_iterations)


def muller(func, seeds, tol, max_iterations):
    x0, x1, x2 = (complex(seed) for seed in seeds)
    f0, f1, f2 = func(x0), func(x1), func(x2)
    for iteration in range(1, max_iterations + 1):
        h1, h2 = x1 - x0, x2 - x1
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        root = cmath.sqrt(b * b - 4.0 * a * f2)
        denominator = b + root if abs(b + root) >= abs(b - root) else b - root
        if denominator == 0:
            raise ConvergenceError('Muller step is undefined', last=x2, iterations=iteration)
        dx = -2.0 * f2 / denominator
        x3 = x2 + dx
        f3 = func(x3)
        logger.debug('muller %d: z = %r, |f| = %.3e', iteration, x3, abs(f3))
        if abs(f3) < tol and abs(dx) < tol:
            return x3, f3, iteration
        x0, x1, x2 = x1, x2, x3
        f0, f1, f2 = f1, f2, f3
    raise ConvergenceError(f'Muller did not converge in {max_iterations} iterations', last=x2,
                           iterations=max_iterations)


def _solve(func, seed, fallback_seeds, tol, max_iterations):
    try:
        z, value, iterations = newton(func, seed, tol, max_iterations, solver_settings.FD_STEP)
        return z, value, iterations, 'newton'
    except ConvergenceError as exc:
        logger.warning('%s; falling back to Muller', exc)
    z, value, iterations = muller(func, fallback_seeds, tol, max_iterations)
    return z, value, iterations, 'muller'


def find_pole(l, delta, system, seed=None, tol=None, max_iterations=None):
    """Second-sheet zero of eta_l near epsilon_l."""
    tol = tol or solver_settings.ROOT_TOL
    if tol < 1e-12:
        raise DomainError('root tolerance must be >= 1e-12')
    max_iterations = max_iterations or solver_settings.MAX_ITERATIONS
    energy = system.params.epsilon(l)
    seed = energy if seed is None else complex(seed)
    fallback = (energy, energy - 1j * MULLER_OFFSET, energy + MULLER_OFFSET)

    z, value, iterations, method = _solve(lambda s: evaluate_eta(s, l, system).value, seed, fallback, tol,
                                          max_iterations)
    if z.imag > SHEET_SLACK:
        raise ConvergenceError(f'root {z!r} lies above the real axis', last=z, iterations=iterations)
    if not system.ctx.contains(z.real):
        raise ConvergenceError(f'root {z!r} left the window J_{system.ctx.k}', last=z, iterations=iterations)

    final = evaluate_eta(z, l, system)
    logger.info('pole l=%d delta=%g: z = %r after %d %s steps', l, delta, z, iterations, method)
    return PoleResult(
        z=z, mu=z - energy, l=l, k=system.ctx.k, delta=delta, residual=abs(final.value),
        iterations=iterations, method=method, condition_free=final.condition_free,
        condition_inner=final.condition_inner, n_max=system.cfg.n_max,
    )


def find_determinant_root(system, seed, tol=None, max_iterations=None):
    """Zero of det(I - beta R_alpha) from the same seed."""
    tol = tol or solver_settings.ROOT_TOL
    max_iterations = max_iterations or solver_settings.MAX_ITERATIONS
    seed = complex(seed)
    fallback = (seed, seed - 1j * MULLER_OFFSET, seed + MULLER_OFFSET)
    z, _, _, _ = _solve(lambda s: bs_determinant(s, system), seed, fallback, tol, max_iterations)
    return z


def mu_lowest_order(l, delta, system, neumann_terms=1):
    """
    4 pi xi beta {||w_l||^2 + beta sum_{n != l} Gamma_n^-1 (w_l, w_n)^2 + (w_l, R~ w_l)}
    at z = epsilon_l, with R~ = sum_{j=1}^{neumann_terms} (beta R)^j.
    """
    params, rule, ctx = system.params, system.rule, system.ctx
    beta = params.beta
    energy = params.epsilon(l)
    vectors = mode_matrix(energy, rule, ctx, system.cfg.n_max)
    w_l = vectors[l - 1]
    modes = np.arange(1, system.cfg.n_max + 1)
    others = modes != l
    couplings = vectors[others] @ (rule.weights * w_l)
    gammas = np.asarray(gamma_n(energy, modes[others], ctx, params))
    rank_term = beta * np.sum(couplings ** 2 / gammas)

    free = assemble_free(energy, rule, ctx, system.cfg)
    step = beta * free.matrix
    image, dressed = w_l, np.zeros_like(w_l)
    for _ in range(neumann_terms):
        image = step @ image
        dressed = dressed + image
    surface_term = pairing(w_l, dressed, rule)

    bracket = pairing(w_l, w_l, rule) + rank_term + surface_term
    return complex(4.0 * math.pi * params.xi_alpha * beta * bracket)


def im_mu_closed_form(l, delta, system, bilinear=False):
    """
    pi xi beta^2 sum_{n <= k} {2 / (iota_n^2 + 1/4) |(w_l, w_n)|^2 + (int w_l chi_n)^2},
    iota_n = Re Gamma_n(epsilon_l + i0).
    bilinear=True uses 4 Im[Gamma_n(eps_l)^-1 (w_l, w_n)^2] for the first term.
    """
    params, rule, ctx = system.params, system.rule, system.ctx
    energy = params.epsilon(l)
    w_l = mode_vector(energy, l, rule, ctx).values
    total = 0.0
    for n in range(1, ctx.k + 1):
        coupling = complex(pairing(w_l, mode_vector(energy, n, rule, ctx).values, rule))
        projection = complex(rule.integrate(w_l * chi_n(n, rule.nodes[:, 2])))
        if bilinear:
            exchange = 4.0 * (coupling ** 2 / complex(gamma_n(energy, n, ctx, params))).imag
        else:
            iota = (2 * math.pi * params.alpha + math.log(math.sqrt(energy - n * n) / 2.0) - PSI_1) / (2 * math.pi)
            exchange = 2.0 / (iota ** 2 + 0.25) * abs(coupling) ** 2
        total += exchange + projection.real ** 2
    return float(math.pi * params.xi_alpha * params.beta ** 2 * total)


def fit_power_law(points):
    """Least squares of ln y on ln x; returns exponent, prefactor and R^2."""
    points = list(points)
    if len(points) < 3:
        raise FitError('a power-law fit needs at least three points')
    x, y = np.array(points, dtype=float).T
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError('power-law fit needs positive data')
    if np.all(x == x[0]):
        raise FitError('all abscissae coincide')
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = ly - (slope * lx + intercept)
    spread = np.sum((ly - ly.mean()) ** 2)
    r_squared = 1.0 - np.sum(residual ** 2) / spread if spread > 0 else 1.0
    return PowerLawFit(float(slope), float(math.exp(intercept)), float(r_squared))


def default_deltas():
    low, high, count = solver_settings.SWEEP_DELTAS
    return [float(value) for value in np.geomspace(low, high, count)]


def _sweep_point(l, delta, params, surface, options, seed=None):
    try:
        system = ResonanceSystem.build(params, scale_surface(surface, delta), l, **options['system'])
        pole = find_pole(l, delta, system, seed=seed, tol=options['tol'])
        closed = im_mu_closed_form(l, delta, system, bilinear=options['bilinear'])
    except SolverError as exc:
        logger.warning('sweep point delta=%g failed: %s', delta, exc)
        return SweepPoint(delta, None, None, status='failed', message=str(exc))
    return SweepPoint(delta, pole, closed)


def sweep_delta(l, deltas, params, surface, order=None, tail_tol=None, n_max=None, tol=None, threads=1,
                seed_from_previous=False, bilinear=False):
    """Poles over increasing deltas, with log-log fits of |Im mu| and |Re mu|."""
    deltas = list(default_deltas() if deltas is None else deltas)
    if any(b <= a for a, b in zip(deltas, deltas[1:])):
        raise DomainError('sweep deltas must be strictly increasing')
    options = {'system': {'order': order, 'tail_tol': tail_tol, 'n_max': n_max}, 'tol': tol, 'bilinear': bilinear}

    if seed_from_previous:
        points, seed = [], None
        for delta in deltas:
            point = _sweep_point(l, delta, params, surface, options, seed=seed)
            points.append(point)
            if point.pole is not None:
                seed = point.pole.z
    else:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            points = list(pool.map(lambda delta: _sweep_point(l, delta, params, surface, options), deltas))

    converged = [point for point in points if point.pole is not None]
    fit_im = fit_re = None
    if len(converged) >= solver_settings.MIN_FIT_POINTS:
        try:
            fit_im = fit_power_law([(p.delta, abs(p.pole.mu.imag)) for p in converged])
            fit_re = fit_power_law([(p.delta, abs(p.pole.mu.real)) for p in converged])
        except FitError as exc:
            logger.warning('sweep fit failed: %s', exc)
    else:
        logger.warning('only %d of %d sweep points converged; no fit', len(converged), len(points))
    return SweepResult(l, points, fit_im, fit_re, [point.closed_form_im for point in points])
