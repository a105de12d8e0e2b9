import functools
import logging
import math
from dataclasses import dataclass

import numpy as np

from layer.conf import solver_settings
from layer.exceptions import CoincidentPointsError, DomainError, IllConditionedError, PoleCollisionError
from layer.geometry import build_quadrature, r_min
from layer.greens import KernelEvalConfig, LayerKernel, omega_n
from layer.specfun import Sheet, SheetContext, SpectralParams, gamma_n

logger = logging.getLogger(__name__)

POLE_COLLISION = 1e-10


@dataclass(frozen=True, eq=False)
class DiscreteKernelOperator:
    """
    Nystrom representation of f -> int K(x, x') f(x') dSigma':
    (A f)_i = sum_j kernel_ij w_j f_j.
    """
    kernel: np.ndarray
    rule: object

    @property
    def weights(self):
        return self.rule.weights

    @property
    def matrix(self):
        return self.kernel * self.weights[None, :]

    def apply(self, values):
        return self.matrix @ values

    def compose(self, other):
        return DiscreteKernelOperator(self.kernel @ (self.weights[:, None] * other.kernel), self.rule)

    def __add__(self, other):
        return DiscreteKernelOperator(self.kernel + other.kernel, self.rule)

    def scaled(self, factor):
        return DiscreteKernelOperator(factor * self.kernel, self.rule)

    def symmetrized(self):
        root = np.sqrt(self.weights)
        return root[:, None] * self.kernel * root[None, :]

    def norm(self):
        """Operator norm on L2(Sigma)."""
        return float(np.linalg.norm(self.symmetrized(), 2))

    def rank(self, tol=1e-10):
        values = np.linalg.svd(self.symmetrized(), compute_uv=False)
        if values.size == 0 or values[0] == 0:
            return 0
        return int(np.sum(values > tol * values[0]))


@dataclass(frozen=True, eq=False)
class ModeVector:
    values: np.ndarray
    n: int
    z: complex
    sheet: SheetContext


def pairing(u, v, rule):
    """Bilinear (unconjugated) pairing sum_j u_j w_j v_j."""
    return np.sum(np.asarray(u) * rule.weights * np.asarray(v), axis=-1)


class NodeKernel:
    """Layer kernel tabulated on the node pairs of a rule, plus the singular-part bookkeeping."""

    def __init__(self, rule, cfg):
        nodes = rule.nodes
        size = rule.size
        self.rule = rule
        self.upper = np.triu_indices(size)
        gap = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)
        off = ~np.eye(size, dtype=bool)
        if np.any(gap[off] == 0):
            raise CoincidentPointsError('quadrature rule has duplicated nodes')
        self.coulomb = np.zeros((size, size))
        self.coulomb[off] = 1.0 / (4.0 * math.pi * gap[off])
        # P_i - sum_{j != i} w_j / (4 pi r_ij), per unit weight of node i
        self.diagonal = (rule.self_potential - self.coulomb @ rule.weights) / rule.weights
        self.table = LayerKernel(nodes[self.upper[0]], nodes[self.upper[1]], cfg, coulomb=False)
        logger.info('tabulated layer kernel on %d node pairs', len(self.table))

    def remainder(self, z, ctx):
        """Regular part S = G - 1/(4 pi r) as a full symmetric matrix."""
        size = self.rule.size
        values = self.table.evaluate(z, ctx)
        out = np.zeros((size, size), dtype=complex)
        out[self.upper] = values
        out.T[self.upper] = values
        return out


@functools.lru_cache(maxsize=8)
def node_kernel(rule, cfg):
    return NodeKernel(rule, cfg)


def assemble_free(z, rule, ctx, cfg):
    """
    R_SigmaSigma(z) with singularity subtraction: off the diagonal the full
    kernel; on it S_ii plus the polar self-integral of 1/(4 pi r) minus the
    off-node quadrature of the same.
    """
    cached = node_kernel(rule, cfg)
    kernel = cached.remainder(z, ctx) + cached.coulomb
    kernel[np.diag_indices(rule.size)] += cached.diagonal
    return DiscreteKernelOperator(kernel, rule)


def mode_vector(z, n, rule, ctx):
    return ModeVector(np.asarray(omega_n(z, n, rule.nodes, ctx), dtype=complex), n, complex(z), ctx)


def mode_matrix(z, rule, ctx, n_max):
    """Rows w_n(z) at the nodes for n = 1..n_max."""
    modes = np.arange(1, n_max + 1)[:, None]
    return np.asarray(omega_n(z, modes, rule.nodes, ctx), dtype=complex)


def _rank_sum(z, rule, ctx, params, cfg, skip=None):
    modes = np.arange(1, cfg.n_max + 1)
    gammas = np.asarray(gamma_n(z, modes, ctx, params))
    vectors = mode_matrix(z, rule, ctx, cfg.n_max)
    keep = modes != skip
    if np.any(np.abs(gammas[keep]) < POLE_COLLISION):
        hit = modes[keep][np.argmin(np.abs(gammas[keep]))]
        raise PoleCollisionError(f'Gamma_{hit}({z!r}) vanishes')
    vectors, gammas = vectors[keep], gammas[keep]
    return vectors.T @ (vectors / gammas[:, None])


def assemble_A_l(z, l, rule, ctx, params, cfg):
    """A_l(z) = sum_{n != l} Gamma_n(z)^-1 (w_n, .) w_n."""
    return DiscreteKernelOperator(_rank_sum(z, rule, ctx, params, cfg, skip=l), rule)


def assemble_dressed(z, rule, ctx, params, cfg):
    """R_alpha,SigmaSigma(z) = R_SigmaSigma(z) + sum_n Gamma_n(z)^-1 (w_n, .) w_n."""
    free = assemble_free(z, rule, ctx, cfg)
    return free + DiscreteKernelOperator(_rank_sum(z, rule, ctx, params, cfg), rule)


@dataclass(frozen=True, eq=False)
class ResonanceSystem:
    """Everything eta_l needs at one delta: couplings, rule on Sigma_delta, sheet and truncation."""
    params: object
    rule: object
    ctx: SheetContext
    cfg: KernelEvalConfig
    condition_limit: float = 1e12

    @classmethod
    def build(cls, params, surface, l, order=None, tail_tol=None, n_max=None, **kernel_options):
        k = params.window(l)
        if k is None:
            raise DomainError(f'epsilon_{l} = {params.epsilon(l)!r} is not embedded')
        rule = build_quadrature(surface, order or solver_settings.QUAD_ORDER)
        cfg = KernelEvalConfig.for_surface(r_min(surface), k, tail_tol=tail_tol, n_max=n_max, **kernel_options)
        return cls(params, rule, SheetContext(k, Sheet.SECOND), cfg, solver_settings.CONDITION_LIMIT)

    @property
    def beta(self):
        return self.params.beta

    def with_beta(self, beta):
        return ResonanceSystem(SpectralParams(self.params.alpha, beta), self.rule, self.ctx, self.cfg,
                               self.condition_limit)


@dataclass(frozen=True)
class EtaEvaluation:
    value: complex
    theta: complex
    condition_free: float
    condition_inner: float


def _checked(matrix, limit, label):
    condition = float(np.linalg.cond(matrix))
    if not np.isfinite(condition) or condition > limit:
        raise IllConditionedError(f'{label} has condition number {condition:.3g}', condition)
    return condition


def evaluate_eta(z, l, system):
    """eta_l(z) = Gamma_l(z) - beta (w_l, T_l w_l) with T_l = (I - beta G A_l)^-1 G, G = (I - beta R)^-1."""
    beta, rule, ctx = system.beta, system.rule, system.ctx
    identity = np.eye(rule.size)
    free = assemble_free(z, rule, ctx, system.cfg)
    base = identity - beta * free.matrix
    condition_free = _checked(base, system.condition_limit, 'I - beta R')
    green = np.linalg.solve(base, identity)
    coupling = assemble_A_l(z, l, rule, ctx, system.params, system.cfg)
    inner = identity - beta * green @ coupling.matrix
    condition_inner = _checked(inner, system.condition_limit, 'I - beta G A_l')
    w_l = mode_vector(z, l, rule, ctx).values
    theta = complex(pairing(w_l, np.linalg.solve(inner, green @ w_l), rule))
    value = complex(gamma_n(z, l, ctx, system.params)) - beta * theta
    return EtaEvaluation(value, theta, condition_free, condition_inner)


def eta_l(z, l, system):
    return evaluate_eta(z, l, system).value


def bs_determinant(z, system):
    """det(I - beta R_alpha,SigmaSigma(z)) of the weighted Nystrom matrix."""
    rule = system.rule
    dressed = assemble_dressed(z, rule, system.ctx, system.params, system.cfg)
    sign, logdet = np.linalg.slogdet(np.eye(rule.size) - system.beta * dressed.matrix)
    return complex(sign * np.exp(logdet))


def neumann_resolvent(free, beta, terms):
    """Truncated sum_{j < terms} (beta R)^j as a matrix."""
    step = beta * free.matrix
    total = np.eye(len(step), dtype=complex)
    power = np.eye(len(step), dtype=complex)
    for _ in range(1, terms):
        power = power @ step
        total = total + power
    return total
