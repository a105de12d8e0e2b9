import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy import special

from layer.exceptions import GeometryError
from layer.geometry import (
    build_quadrature, disk, load_mesh, r_min, rectangle_patch, scale_surface, spherical_cap, surface_from_spec,
    tabulated_mesh,
)


class BaseTest(SimpleTestCase):
    def setUp(self):
        self.disk = disk(center=(1.5, 0.0, 1.5), radius=0.2)
        self.rectangle = rectangle_patch(origin=(1.0, 0.0, 1.0), edge_u=(0.5, 0.0, 0.0), edge_v=(0.0, 0.5, 0.0))
        self.cap = spherical_cap(center=(1.5, 0.0, 1.0), radius=0.3, polar_angle=math.pi / 4)


class SurfaceTests(BaseTest):
    """
    Tests for surface construction and validation
    """
    def test_disk_leaves_layer(self):
        """
        Test a disk crossing the wall x3 = 0 is refused.
        """
        with self.assertRaises(GeometryError):
            disk(center=(1.5, 0.0, 0.1), radius=0.2, normal=(1.0, 0.0, 0.0))

    def test_bad_cap_angle(self):
        """
        Test a cap needs a polar angle below pi/2.
        """
        with self.assertRaises(GeometryError):
            spherical_cap(center=(1.5, 0.0, 1.0), radius=0.3, polar_angle=math.pi / 2)

    def test_parallel_rectangle_edges(self):
        """
        Test a degenerate rectangle is refused.
        """
        with self.assertRaises(GeometryError):
            rectangle_patch(origin=(1.0, 0.0, 1.0), edge_u=(0.5, 0.0, 0.0), edge_v=(1.0, 0.0, 0.0))

    def test_surface_from_spec(self):
        """
        Test the config families build surfaces.
        """
        surface = surface_from_spec('disk', center=(1.5, 0.0, 1.5), radius=0.2)
        self.assertEqual(surface.name, 'disk')
        with self.assertRaises(GeometryError):
            surface_from_spec('torus', center=(1.5, 0.0, 1.5))

    def test_scale_bounds(self):
        """
        Test delta must lie in (0, 1].
        """
        for delta in (0.0, -0.1, 1.5):
            with self.assertRaises(GeometryError):
                scale_surface(self.disk, delta)

    def test_scale_toward_anchor(self):
        """
        Test scaling shrinks toward x0 and the area goes like delta^2.
        """
        half = scale_surface(self.disk, 0.5)
        self.assertAlmostEqual(half.area(), 0.25 * self.disk.area(), places=12)
        self.assertAlmostEqual(r_min(half), 1.4, places=6)

    def test_r_min(self):
        """
        Test the distance to the wire axis.
        """
        self.assertAlmostEqual(r_min(self.disk), 1.3, places=6)
        self.assertAlmostEqual(r_min(self.rectangle), 1.0, places=6)


class QuadratureTests(BaseTest):
    """
    Tests for the Nystrom rules
    """
    def test_disk_area(self):
        """
        Test the disk rule integrates 1 exactly.
        """
        rule = build_quadrature(self.disk, 8)
        self.assertEqual(rule.size, 64)
        self.assertAlmostEqual(rule.area, math.pi * 0.04, places=12)

    def test_rectangle_area(self):
        """
        Test the rectangle rule integrates 1 exactly.
        """
        rule = build_quadrature(self.rectangle, 6)
        self.assertEqual(rule.size, 36)
        self.assertAlmostEqual(rule.area, 0.25, places=12)

    def test_cap_area(self):
        """
        Test the cap area 2 pi R^2 (1 - cos theta0).
        """
        rule = build_quadrature(self.cap, 16, with_self_potential=False)
        expected = 2.0 * math.pi * 0.09 * (1.0 - math.cos(math.pi / 4))
        self.assertAlmostEqual(rule.area / expected, 1.0, places=8)

    def test_disk_self_potential(self):
        """
        Test the polar self-integral against R E(s) / pi on a flat disk.
        """
        rule = build_quadrature(self.disk, 12)
        s = np.hypot(rule.param_nodes[:, 0], rule.param_nodes[:, 1])
        inner = s < 0.8
        expected = 0.2 * special.ellipe(s[inner] ** 2) / math.pi
        np.testing.assert_allclose(rule.self_potential[inner], expected, rtol=1e-8)

    def test_rectangle_self_potential_center(self):
        """
        Test the self-integral at the center of a square against the closed form.
        """
        square = rectangle_patch(origin=(1.0, -0.5, 1.0), edge_u=(1.0, 0.0, 0.0), edge_v=(0.0, 1.0, 0.0))
        rule = build_quadrature(square, 9)
        center = np.argmin(np.hypot(rule.param_nodes[:, 0] - 0.5, rule.param_nodes[:, 1] - 0.5))
        # int over [-1/2, 1/2]^2 of 1/r = 4 ln(1 + sqrt 2)
        expected = 4.0 * math.log(1.0 + math.sqrt(2.0)) / (4.0 * math.pi)
        self.assertAlmostEqual(rule.self_potential[center], expected, places=8)

    def test_order_too_small(self):
        """
        Test an order below two is refused.
        """
        with self.assertRaises(GeometryError):
            build_quadrature(self.disk, 1)


class MeshTests(BaseTest):
    """
    Tests for tabulated meshes
    """
    def setUp(self):
        super().setUp()
        self.nodes = np.array([[1.5, 0.0, 1.5], [1.6, 0.0, 1.5], [1.5, 0.1, 1.5], [1.6, 0.1, 1.5]])
        self.weights = np.full(4, 0.01)

    def test_mesh_rule(self):
        """
        Test the table becomes the rule with the flat-disk self cell.
        """
        rule = build_quadrature(tabulated_mesh(self.nodes, self.weights), 16)
        self.assertEqual(rule.size, 4)
        self.assertAlmostEqual(rule.area, 0.04, places=14)
        self.assertTrue(np.all(rule.self_potential > 0.5 * math.sqrt(0.01 / math.pi)))

    def test_load_mesh(self):
        """
        Test reading x1 x2 x3 weight columns from disk.
        """
        with tempfile.TemporaryDirectory() as folder:
            path = Path(folder) / 'patch.txt'
            np.savetxt(path, np.column_stack([self.nodes, self.weights]))
            surface = load_mesh(path)
            self.assertEqual(surface.name, 'patch')
            self.assertAlmostEqual(build_quadrature(surface, 4).area, 0.04, places=14)

            bad = Path(folder) / 'bad.txt'
            np.savetxt(bad, self.nodes)
            with self.assertRaises(GeometryError):
                load_mesh(bad)


class AdmissibilityTests(BaseTest):
    """
    Tests for surfaces that touch the wire or the walls
    """
    def test_disk_around_axis(self):
        """
        Test a disk whose interior contains an axis point is refused.
        """
        with self.assertRaises(GeometryError):
            disk(center=(0.3, 0.0, 1.5), radius=0.5)

    def test_rectangle_crossing_axis_off_grid(self):
        """
        Test a strip crossing the axis between sample points is refused.
        """
        with self.assertRaises(GeometryError):
            rectangle_patch(origin=(-0.7, 0.0, 1.0), edge_u=(2.0, 0.0, 0.0), edge_v=(0.0, 0.0, 0.5))

    def test_scaled_disk_stays_clear(self):
        """
        Test shrinking toward an anchor off the axis keeps the surface admissible.
        """
        surface = disk(center=(0.8, 0.0, 1.5), radius=0.5)
        self.assertGreater(r_min(scale_surface(surface, 0.5)), 0.5)


class ScalingTests(BaseTest):
    """
    Tests for the homothety toward x0 on every family
    """
    def setUp(self):
        super().setUp()
        nodes = np.array([[1.5, 0.0, 1.5], [1.6, 0.0, 1.5], [1.5, 0.1, 1.5], [1.6, 0.1, 1.5]])
        self.mesh = tabulated_mesh(nodes, np.full(4, 0.01))
        self.surfaces = [self.rectangle, self.disk, self.cap, self.mesh]

    def test_area_ratio(self):
        """
        Test |Sigma_delta| / |Sigma| = delta^2 for delta in 0.1, 0.3, 0.7.
        """
        for surface in self.surfaces:
            area = surface.area()
            for delta in (0.1, 0.3, 0.7):
                ratio = scale_surface(surface, delta).area() / area
                self.assertAlmostEqual(ratio, delta ** 2, places=10)

    def test_cap_radius(self):
        """
        Test the scaled cap lies on the sphere of radius delta R around the scaled center.
        """
        center = np.array([1.5, 0.0, 1.0])
        x0 = self.cap.x0
        for delta in (0.1, 0.3, 0.7):
            rule = build_quadrature(scale_surface(self.cap, delta), 6, with_self_potential=False)
            moved = delta * center + (1.0 - delta) * x0
            np.testing.assert_allclose(np.linalg.norm(rule.nodes - moved, axis=1), delta * 0.3, rtol=1e-12)

    def test_nodes_inside_layer(self):
        """
        Test every quadrature node satisfies 0 < x3 < pi.
        """
        for surface in self.surfaces:
            for delta in (0.1, 1.0):
                nodes = build_quadrature(scale_surface(surface, delta), 6, with_self_potential=False).nodes
                self.assertTrue(np.all((nodes[:, 2] > 0) & (nodes[:, 2] < math.pi)))
