from __future__ import annotations

import math

import numpy as np
import pytest

from radweb.geometry import (
    GeometryError,
    ModelParams,
    from_polar,
    quadrangle_contains,
    quadrangle_vertices,
    to_polar,
    triangle_contains,
    w_point,
)


def _in_convex_polygon(poly: np.ndarray, p, tol: float = 1e-12) -> bool:
    """Oracle: sign of cross products along a convex polygon's edges."""
    signs = []
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        signs.append(cross)
    signs = np.array(signs)
    return bool(np.all(signs >= -tol) or np.all(signs <= tol))


class TestParams:
    def test_derived_constants(self, params):
        assert params.c == pytest.approx(1.0)
        assert params.tau == pytest.approx(1.0)
        assert params.c_hat == pytest.approx(0.5 * math.sqrt(math.pi), rel=1e-12)
        assert params.c_hat == pytest.approx(0.88623, abs=1e-5)
        assert params.sigma2 == pytest.approx(0.37612, abs=1e-5)

    def test_c_hat_is_mean_of_gaussian_tail_law(self, params):
        # mean of V with P(V > v) = exp(-c v^2) is the integral of the tail
        from scipy.integrate import quad
        mean, _ = quad(lambda v: math.exp(-params.c * v * v), 0, np.inf)
        assert params.c_hat == pytest.approx(mean, rel=1e-10)

    def test_c_n_exceeds_c_and_converges(self):
        for n in (1e2, 1e4, 1e6):
            p = ModelParams(n=n)
            assert p.c_n(0.0) > p.c
            assert p.c_n(p.tau * n) > p.c
        assert ModelParams(n=1e9).c_n(0.0) == pytest.approx(1.0, abs=1e-8)

    def test_truncation_depth_positive(self, params):
        for s in (0.0, 0.5 * params.n, params.n):
            assert params.trunc_depth(s) > 0

    @pytest.mark.parametrize("kw", [
        {"theta": 0.0}, {"theta": math.pi / 2}, {"alpha": 0.0}, {"alpha": 1.0},
        {"a_exp": 0.25}, {"a_exp": 0.46, "b_exp": 0.45}, {"b_exp": 0.5}, {"n": 1.0},
        {"n": math.e, "alpha": 0.1},
    ])
    def test_invalid_parameters_rejected(self, kw):
        with pytest.raises(GeometryError):
            ModelParams(**kw)


class TestPolar:
    def test_axis_point(self):
        r, phi = to_polar(0.0, -1.0)
        assert r == 1.0 and phi == pytest.approx(-math.pi / 2)

    def test_identity_axis(self):
        assert from_polar(1.0, 0.0) == pytest.approx((1.0, 0.0))

    def test_three_four_five(self):
        r, phi = to_polar(3.0, 4.0)
        assert r == 5.0
        assert phi == pytest.approx(0.9273, abs=1e-4)
        assert phi == pytest.approx(math.atan2(4, 3))

    def test_origin_and_branch_cut(self):
        assert to_polar(0.0, 0.0) == (0.0, 0.0)
        assert to_polar(-1.0, 0.0)[1] == pytest.approx(math.pi)


class TestQuadrangle:
    x = (0.0, -1.0)

    def test_point_on_bisector(self, params):
        assert quadrangle_contains(self.x, params, (0.0, -0.5))

    def test_point_beyond_apex(self, params):
        assert not quadrangle_contains(self.x, params, (0.0, -1.1))

    def test_wide_angle_point(self, params):
        # angle at x is arccos(0.4 / sqrt(0.52)), about 56.3 degrees
        ang = math.degrees(math.acos(0.4 / math.sqrt(0.52)))
        assert ang == pytest.approx(56.31, abs=0.01)
        assert not quadrangle_contains(self.x, params, (0.6, -0.6))

    def test_boundary_members(self, params):
        assert quadrangle_contains(self.x, params, (0.0, 0.0))
        assert quadrangle_contains(self.x, params, self.x)
        for v in quadrangle_vertices(self.x, params):
            assert quadrangle_contains(self.x, params, v)

    def test_invalid_apex(self, params):
        with pytest.raises(GeometryError, match="invalid-apex"):
            quadrangle_contains((0.0, 0.0), params, (0.1, 0.1))

    def test_matches_vertex_polygon(self):
        # two-angle predicate against an explicit convex polygon
        rng = np.random.default_rng(3)
        for theta in (0.3, math.pi / 4, 1.2):
            p = ModelParams(theta=theta)
            for _ in range(20):
                x = rng.normal(size=2) * 5
                poly = quadrangle_vertices(x, p)
                for q in x + rng.uniform(-1, 1, size=(50, 2)) * np.linalg.norm(x):
                    if abs(np.linalg.norm(q - poly, axis=1)).min() < 1e-9:
                        continue
                    assert quadrangle_contains(x, p, q) == _in_convex_polygon(poly, q)

    def test_right_angles_at_side_vertices(self, params):
        x = np.array([2.0, -3.0])
        _, y, o, z = quadrangle_vertices(x, params)
        for v in (y, z):
            assert np.dot(x - v, o - v) == pytest.approx(0.0, abs=1e-12)


class TestTriangle:
    def test_degenerate_depth(self, params):
        x = (0.0, -1.0)
        assert triangle_contains(x, 0.0, params, x)
        assert not triangle_contains(x, 0.0, params, (0.0, -0.99))

    def test_bisector_interior(self):
        n = 1e4
        p = ModelParams(n=n)
        x = (0.0, -n)
        ln = math.log(n)
        assert triangle_contains(x, ln, p, (0.0, -n + ln / 2))

    def test_mixed_example(self, params):
        x = (0.0, -1.0)
        q = (0.1, -0.75)
        assert math.hypot(*q) == pytest.approx(0.7566, abs=1e-4)
        assert math.degrees(math.atan2(0.1, 0.25)) == pytest.approx(21.8, abs=0.1)
        assert triangle_contains(x, 0.3, params, q)

    def test_invalid_depth(self, params):
        with pytest.raises(GeometryError, match="invalid-depth"):
            triangle_contains((0.0, -1.0), -0.1, params, (0.0, -0.9))
        with pytest.raises(GeometryError, match="invalid-depth"):
            triangle_contains((0.0, -1.0), 1.5, params, (0.0, -0.9))


class TestWPoint:
    def test_axis(self):
        assert w_point((0.0, -10.0), 4.0) == pytest.approx((0.0, -6.0))

    def test_identity(self):
        assert w_point((2.5, -1.5), 0.0) == pytest.approx((2.5, -1.5))

    def test_collapse(self):
        assert w_point((3.0, 4.0), 5.0) == pytest.approx((0.0, 0.0))

    def test_norm(self):
        w = w_point((3.0, 4.0), 1.5)
        assert math.hypot(*w) == pytest.approx(3.5)
