import dataclasses
import enum
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import optimize

from layer.exceptions import GeometryError

logger = logging.getLogger(__name__)

SAMPLE_POINTS = 65
AXIS_GAP = 1e-6
LAYER_GAP = 1e-9
PLANE_SLACK = 1e-12


class ParameterDomain(enum.Enum):
    RECTANGLE = 'rectangle'
    DISK = 'disk'
    TABULATED = 'tabulated'


def _vector(value, name):
    value = np.asarray(value, dtype=float)
    if value.shape != (3,):
        raise GeometryError(f'{name} must be a 3-vector, got shape {value.shape}')
    return value


def _frame(normal):
    """Orthonormal tangent pair (e1, e2) with e1 x e2 along normal."""
    normal = _vector(normal, 'normal')
    length = np.linalg.norm(normal)
    if length == 0:
        raise GeometryError('normal must be non-zero')
    normal = normal / length
    helper = np.array([1.0, 0.0, 0.0]) if abs(normal[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = helper - helper.dot(normal) * normal
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(normal, e1)


def _gauss(order, low, high):
    x, w = leggauss(order)
    half = 0.5 * (high - low)
    return low + half * (x + 1.0), half * w


@dataclass(frozen=True, eq=False)
class RectangleChart:
    """Flat parallelogram origin + q1 edge_u + q2 edge_v, (q1, q2) in [0, 1]^2."""
    origin: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray

    domain = ParameterDomain.RECTANGLE
    extent = (0.0, 1.0, 0.0, 1.0)
    centroid = (0.5, 0.5)

    def point(self, q1, q2):
        q1, q2 = np.asarray(q1)[..., None], np.asarray(q2)[..., None]
        return self.origin + q1 * self.edge_u + q2 * self.edge_v

    def tangents(self, q1, q2):
        shape = np.broadcast(q1, q2).shape + (3,)
        return np.broadcast_to(self.edge_u, shape), np.broadcast_to(self.edge_v, shape)

    @property
    def normal(self):
        return np.cross(self.edge_u, self.edge_v)


@dataclass(frozen=True, eq=False)
class DiskChart:
    """Flat disk center + radius (q1 e1 + q2 e2) over the unit disk."""
    center: np.ndarray
    radius: float
    e1: np.ndarray
    e2: np.ndarray

    domain = ParameterDomain.DISK
    centroid = (0.0, 0.0)

    @property
    def extent(self):
        return (1.0,)

    def point(self, q1, q2):
        q1, q2 = np.asarray(q1)[..., None], np.asarray(q2)[..., None]
        return self.center + self.radius * (q1 * self.e1 + q2 * self.e2)

    def tangents(self, q1, q2):
        shape = np.broadcast(q1, q2).shape + (3,)
        return (np.broadcast_to(self.radius * self.e1, shape),
                np.broadcast_to(self.radius * self.e2, shape))

    @property
    def normal(self):
        return np.cross(self.e1, self.e2)


@dataclass(frozen=True, eq=False)
class CapChart:
    """
    Spherical cap of polar angle theta0 < pi/2 around axis, projected onto the
    tangent plane: q in the disk of radius sin(theta0).
    """
    center: np.ndarray
    radius: float
    polar_angle: float
    e1: np.ndarray
    e2: np.ndarray
    axis: np.ndarray

    domain = ParameterDomain.DISK
    centroid = (0.0, 0.0)

    @property
    def extent(self):
        return (math.sin(self.polar_angle),)

    def _height(self, q1, q2):
        return np.sqrt(np.clip(1.0 - q1 ** 2 - q2 ** 2, 0.0, None))

    def point(self, q1, q2):
        q1, q2 = np.asarray(q1, dtype=float), np.asarray(q2, dtype=float)
        h = self._height(q1, q2)[..., None]
        return self.center + self.radius * (q1[..., None] * self.e1 + q2[..., None] * self.e2 + h * self.axis)

    def tangents(self, q1, q2):
        q1, q2 = np.asarray(q1, dtype=float), np.asarray(q2, dtype=float)
        h = self._height(q1, q2)[..., None]
        d1 = self.radius * (self.e1 - (q1[..., None] / h) * self.axis)
        d2 = self.radius * (self.e2 - (q2[..., None] / h) * self.axis)
        return d1, d2

    @property
    def normal(self):
        return self.axis


@dataclass(frozen=True, eq=False)
class TabulatedChart:
    """Nodes and area weights read from a table; no parametrization."""
    nodes: np.ndarray
    weights: np.ndarray

    domain = ParameterDomain.TABULATED
    extent = ()
    centroid = None
    normal = None


@dataclass(frozen=True, eq=False)
class Surface:
    """
    Impurity surface: a chart homothetically scaled toward the anchor x0,
    x_delta(q) = scale * x(q) + (1 - scale) * x0.
    """
    name: str
    chart: object
    x0: np.ndarray
    scale: float = 1.0

    @property
    def domain(self):
        return self.chart.domain

    @property
    def normal(self):
        return self.chart.normal

    def param_map(self, q1, q2):
        return self.scale * self.chart.point(q1, q2) + (1.0 - self.scale) * self.x0

    def tangents(self, q1, q2):
        d1, d2 = self.chart.tangents(q1, q2)
        return self.scale * d1, self.scale * d2

    def jacobian(self, q1, q2):
        d1, d2 = self.tangents(q1, q2)
        return np.linalg.norm(np.cross(d1, d2), axis=-1)

    def area(self, order=32):
        return build_quadrature(self, order, with_self_potential=False).area


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Nodes, Jacobian-weighted weights and, per node, the single-layer self
    potential P_i = int dSigma' / (4 pi |x_i - x'|).
    """
    nodes: np.ndarray
    weights: np.ndarray
    param_nodes: np.ndarray
    self_potential: np.ndarray
    surface: Surface
    order: int

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise GeometryError('quadrature weights must be positive')

    @property
    def size(self):
        return len(self.weights)

    @property
    def area(self):
        return float(self.weights.sum())

    def integrate(self, values):
        return np.dot(self.weights, values)


def rectangle_patch(origin, edge_u, edge_v, x0=None, name='rectangle'):
    chart = RectangleChart(_vector(origin, 'origin'), _vector(edge_u, 'edge_u'), _vector(edge_v, 'edge_v'))
    if np.linalg.norm(chart.normal) == 0:
        raise GeometryError('rectangle edges must not be parallel')
    return _surface(name, chart, x0)


def disk(center, radius, normal=(0.0, 0.0, 1.0), x0=None, name='disk'):
    if radius <= 0:
        raise GeometryError('disk radius must be positive')
    e1, e2 = _frame(normal)
    return _surface(name, DiskChart(_vector(center, 'center'), float(radius), e1, e2), x0)


def spherical_cap(center, radius, polar_angle, axis=(0.0, 0.0, 1.0), x0=None, name='cap'):
    if radius <= 0:
        raise GeometryError('cap radius must be positive')
    if not 0 < polar_angle < math.pi / 2:
        raise GeometryError('cap polar angle must lie in (0, pi/2)')
    e1, e2 = _frame(axis)
    unit = np.cross(e1, e2)
    chart = CapChart(_vector(center, 'center'), float(radius), float(polar_angle), e1, e2, unit)
    return _surface(name, chart, x0)


def tabulated_mesh(nodes, weights, x0=None, name='mesh'):
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 3 or len(weights) != len(nodes):
        raise GeometryError('mesh needs an (N, 3) node table with N weights')
    if x0 is None:
        centroid = weights.dot(nodes) / weights.sum()
        x0 = nodes[np.argmin(np.linalg.norm(nodes - centroid, axis=1))]
    return _surface(name, TabulatedChart(nodes, weights), x0)


def load_mesh(path, x0=None):
    table = np.loadtxt(Path(path), ndmin=2)
    if table.shape[1] != 4:
        raise GeometryError(f'{path}: expected columns x1 x2 x3 weight')
    return tabulated_mesh(table[:, :3], table[:, 3], x0=x0, name=Path(path).stem)


def surface_from_spec(family, **params):
    """Build a surface from a validated config section."""
    builders = {
        'rectangle': lambda p: rectangle_patch(p['origin'], p['edge_u'], p['edge_v'], x0=p.get('anchor')),
        'disk': lambda p: disk(p['center'], p['radius'], p.get('normal', (0.0, 0.0, 1.0)), x0=p.get('anchor')),
        'cap': lambda p: spherical_cap(p['center'], p['radius'], p['polar_angle'],
                                       p.get('axis', (0.0, 0.0, 1.0)), x0=p.get('anchor')),
        'mesh': lambda p: load_mesh(p['path'], x0=p.get('anchor')),
    }
    if family not in builders:
        raise GeometryError(f'unknown surface family {family!r}')
    return builders[family](params)


def _surface(name, chart, x0):
    if x0 is None:
        x0 = chart.point(*chart.centroid)
    surface = Surface(name=name, chart=chart, x0=_vector(x0, 'x0'))
    validate_surface(surface)
    return surface


def _sample(surface, count=SAMPLE_POINTS):
    """Dense parameter grid including the boundary, mapped to the surface."""
    chart = surface.chart
    if chart.domain is ParameterDomain.TABULATED:
        return surface.scale * chart.nodes + (1.0 - surface.scale) * surface.x0
    if chart.domain is ParameterDomain.RECTANGLE:
        a1, b1, a2, b2 = chart.extent
        q1, q2 = np.meshgrid(np.linspace(a1, b1, count), np.linspace(a2, b2, count))
    else:
        radius, = chart.extent
        r, theta = np.meshgrid(np.linspace(0.0, radius, count), np.linspace(0.0, 2 * math.pi, count))
        q1, q2 = r * np.cos(theta), r * np.sin(theta)
    return surface.param_map(q1.ravel(), q2.ravel())


def _meets_axis(surface):
    """
    Exact test for flat charts: does the wire axis x1 = x2 = 0 cross the
    surface? None for curved or tabulated charts.
    """
    chart = surface.chart
    if not isinstance(chart, (RectangleChart, DiskChart)):
        return None
    normal = chart.normal / np.linalg.norm(chart.normal)
    anchor = surface.param_map(*chart.centroid)
    offset = float(anchor.dot(normal))
    if abs(normal[2]) > PLANE_SLACK:
        crossing = np.array([0.0, 0.0, offset / normal[2]])
    elif abs(offset) > AXIS_GAP:
        return False
    else:
        crossing = None

    if isinstance(chart, DiskChart):
        radius = surface.scale * chart.radius + AXIS_GAP
        if crossing is None:
            return math.hypot(anchor[0], anchor[1]) <= radius
        return float(np.linalg.norm(crossing - anchor)) <= radius

    origin = surface.param_map(0.0, 0.0)
    inverse = np.linalg.pinv(surface.scale * np.column_stack([chart.edge_u, chart.edge_v]))
    if crossing is not None:
        q = inverse @ (crossing - origin)
        return bool(np.all((q >= -PLANE_SLACK) & (q <= 1.0 + PLANE_SLACK)))
    # axis inside the plane: q(t) = slope t + start must enter [0, 1]^2
    slope, start = inverse[:, 2], -inverse @ origin
    low, high = -math.inf, math.inf
    for rate, base in zip(slope, start):
        if abs(rate) < PLANE_SLACK:
            if not -PLANE_SLACK <= base <= 1.0 + PLANE_SLACK:
                return False
            continue
        ends = sorted((-base / rate, (1.0 - base) / rate))
        low, high = max(low, ends[0]), min(high, ends[1])
    return low <= high + PLANE_SLACK


def validate_surface(surface):
    if not 0 < surface.x0[2] < math.pi:
        raise GeometryError('scaling anchor x0 must lie inside the layer')
    lowest = _refined_min(surface, lambda x: x[..., 2])
    highest = -_refined_min(surface, lambda x: -x[..., 2])
    if lowest <= LAYER_GAP or highest >= math.pi - LAYER_GAP:
        raise GeometryError(f'surface {surface.name!r} leaves the layer 0 < x3 < pi')
    if _meets_axis(surface) or r_min(surface) <= AXIS_GAP:
        raise GeometryError(f'surface {surface.name!r} meets the wire axis')


def scale_surface(surface, delta):
    """Sigma_delta, the homothety of ratio delta toward x0."""
    if not 0 < delta <= 1:
        raise GeometryError(f'delta must lie in (0, 1], got {delta!r}')
    scaled = dataclasses.replace(surface, scale=surface.scale * delta)
    validate_surface(scaled)
    return scaled


def _refined_min(surface, measure, polish=3):
    """Minimum of measure(x) over the surface: grid search, then local descent from the best grid points."""
    values = measure(_sample(surface))
    best = float(values.min())
    chart = surface.chart
    if chart.domain is ParameterDomain.TABULATED:
        return best

    if chart.domain is ParameterDomain.RECTANGLE:
        a1, b1, a2, b2 = chart.extent
        bounds = [(a1, b1), (a2, b2)]

        def to_param(p):
            return p[0], p[1]

        q1, q2 = np.meshgrid(np.linspace(a1, b1, SAMPLE_POINTS), np.linspace(a2, b2, SAMPLE_POINTS))
        starts = np.column_stack([q1.ravel(), q2.ravel()])
    else:
        radius, = chart.extent
        bounds = [(0.0, radius), (None, None)]

        def to_param(p):
            return p[0] * math.cos(p[1]), p[0] * math.sin(p[1])

        r, theta = np.meshgrid(np.linspace(0.0, radius, SAMPLE_POINTS),
                               np.linspace(0.0, 2 * math.pi, SAMPLE_POINTS))
        starts = np.column_stack([r.ravel(), theta.ravel()])

    def objective(p):
        return float(measure(surface.param_map(*to_param(p))))

    for index in np.argsort(values)[:polish]:
        found = optimize.minimize(objective, starts[index], method='L-BFGS-B', bounds=bounds)
        best = min(best, float(found.fun))
    return best


def r_min(surface):
    """Distance from the surface to the wire axis."""
    return max(_refined_min(surface, lambda x: np.hypot(x[..., 0], x[..., 1])), 0.0)


def build_quadrature(surface, order, with_self_potential=True):
    """
    Tensor Gauss-Legendre on a rectangle domain, Gauss-Legendre in radius times
    the trapezoid rule in angle on a disk domain, the table itself for a mesh.
    """
    if order < 2:
        raise GeometryError(f'quadrature order must be >= 2, got {order}')
    chart = surface.chart

    if chart.domain is ParameterDomain.TABULATED:
        nodes = surface.scale * chart.nodes + (1.0 - surface.scale) * surface.x0
        weights = surface.scale ** 2 * chart.weights
        params = np.column_stack([np.arange(len(weights), dtype=float), np.zeros(len(weights))])
        potential = _mesh_self_potential(nodes, weights) if with_self_potential else np.zeros_like(weights)
        return QuadratureRule(nodes, weights, params, potential, surface, order)

    if chart.domain is ParameterDomain.RECTANGLE:
        a1, b1, a2, b2 = chart.extent
        x1, w1 = _gauss(order, a1, b1)
        x2, w2 = _gauss(order, a2, b2)
        q1, q2 = (g.ravel() for g in np.meshgrid(x1, x2, indexing='ij'))
        base = np.outer(w1, w2).ravel()
    else:
        radius, = chart.extent
        r, wr = _gauss(order, 0.0, radius)
        theta = 2 * math.pi * (np.arange(order) + 0.5) / order
        rr, tt = (g.ravel() for g in np.meshgrid(r, theta, indexing='ij'))
        q1, q2 = rr * np.cos(tt), rr * np.sin(tt)
        base = np.outer(wr * r, np.full(order, 2 * math.pi / order)).ravel()

    nodes = surface.param_map(q1, q2)
    weights = base * surface.jacobian(q1, q2)
    params = np.column_stack([q1, q2])
    if with_self_potential:
        potential = _self_potential(surface, params, order)
    else:
        potential = np.zeros_like(weights)
    logger.debug('built %d-node rule of order %d on %s', len(weights), order, surface.name)
    return QuadratureRule(nodes, weights, params, potential, surface, order)


def _polar_sum(surface, centers, theta, theta_weights, reach, radial):
    """
    Sum of J(q) t / |x(q) - x(q_i)| over t in [0, reach] along each ray,
    i.e. the integral of J / |x - x_i| in polar coordinates around q_i.
    Shapes: centers (N, 2), theta and theta_weights and reach (N, M).
    """
    tx, tw = leggauss(radial)
    t = 0.5 * reach[..., None] * (tx + 1.0)
    dt = 0.5 * reach[..., None] * tw
    q1 = centers[:, 0, None, None] + t * np.cos(theta)[..., None]
    q2 = centers[:, 1, None, None] + t * np.sin(theta)[..., None]
    gap = np.linalg.norm(surface.param_map(q1, q2) - surface.param_map(centers[:, 0], centers[:, 1])[:, None, None, :],
                         axis=-1)
    integrand = surface.jacobian(q1, q2) * t / gap
    return np.sum(theta_weights * np.sum(integrand * dt, axis=-1), axis=-1)


def _self_potential(surface, params, order):
    """
    Polar (Duffy-type) integration of 1 / (4 pi |x - x_i|) around every node:
    four triangles on a rectangle domain, one disk sweep on a disk domain.
    """
    chart = surface.chart
    total = np.zeros(len(params))
    if chart.domain is ParameterDomain.RECTANGLE:
        a1, b1, a2, b2 = chart.extent
        corners = np.array([[a1, a2], [b1, a2], [b1, b2], [a1, b2]])
        gx, gw = leggauss(order)
        for start, end in zip(corners, np.roll(corners, -1, axis=0)):
            to_start = start - params
            to_end = end - params
            phi_a = np.arctan2(to_start[:, 1], to_start[:, 0])
            phi_b = np.arctan2(to_end[:, 1], to_end[:, 0])
            phi_b = np.where(phi_b <= phi_a, phi_b + 2 * math.pi, phi_b)
            edge = end - start
            outward = np.array([edge[1], -edge[0]]) / np.linalg.norm(edge)
            distance = np.abs(to_start @ outward)
            foot = math.atan2(outward[1], outward[0])
            half = 0.5 * (phi_b - phi_a)
            theta = phi_a[:, None] + half[:, None] * (gx + 1.0)
            reach = distance[:, None] / np.cos(theta - foot)
            total += _polar_sum(surface, params, theta, half[:, None] * gw, reach, order)
    else:
        radius, = chart.extent
        count = 4 * order
        theta = np.broadcast_to(2 * math.pi * (np.arange(count) + 0.5) / count, (len(params), count))
        along = params[:, 0, None] * np.cos(theta) + params[:, 1, None] * np.sin(theta)
        inside = radius ** 2 - np.sum(params ** 2, axis=1)
        reach = -along + np.sqrt(along ** 2 + inside[:, None])
        total = _polar_sum(surface, params, theta, np.full(theta.shape, 2 * math.pi / count), reach, order)
    return total / (4 * math.pi)


def _mesh_self_potential(nodes, weights):
    """Off-node sum plus the equal-area flat disk around each node."""
    gap = np.linalg.norm(nodes[:, None, :] - nodes[None, :, :], axis=-1)
    np.fill_diagonal(gap, np.inf)
    return (weights[None, :] / gap).sum(axis=1) / (4 * math.pi) + 0.5 * np.sqrt(weights / math.pi)
