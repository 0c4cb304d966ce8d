from __future__ import annotations

import math

import numpy as np
import pytest

from radweb import transforms as tf
from radweb.geometry import GeometryError, ModelParams
from radweb.paths import PathPolyline, WebEnsemble


def _polar(r, sigma):
    return [r * math.sin(sigma), -r * math.cos(sigma)]


class TestXi:
    def test_outer_boundary(self):
        np.testing.assert_allclose(tf.xi(_polar(100.0, 0.0), 100.0), [[0.0, 0.0]], atol=1e-12)

    def test_inner_boundary(self):
        n, alpha = 100.0, 0.5
        tau = 1 / alpha - 1
        np.testing.assert_allclose(tf.xi(_polar(alpha * n, 0.0), n), [[0.0, tau * n]],
                                   atol=1e-12)

    def test_numeric_example(self):
        # (100 * 0.01, (100 - 80) / (80 / 100))
        np.testing.assert_allclose(tf.xi(_polar(80.0, 0.01), 100.0), [[1.0, 25.0]], rtol=1e-12)

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        n = 1e4
        pts = np.array([_polar(r, s) for r, s in zip(rng.uniform(10, 2e4, 200),
                                                     rng.uniform(-1, 1, 200))])
        back = tf.xi_inverse(tf.xi(pts, n), n)
        np.testing.assert_allclose(back, pts, rtol=1e-10, atol=1e-10 * n)

    def test_origin_rejected(self):
        with pytest.raises(tf.DomainError):
            tf.xi([0.0, 0.0], 10.0)


class TestRescale:
    def test_examples(self):
        np.testing.assert_array_equal(tf.rescale([0.0, 0.0], 100.0), [[0.0, 0.0]])
        np.testing.assert_allclose(tf.rescale([10.0, 100.0], 100.0), [[1.0, 1.0]])

    def test_composition_with_xi(self):
        n = 1e4
        out = tf.rescale(tf.xi(_polar(n / 2, n ** -0.5), n), n)
        np.testing.assert_allclose(out, [[1.0, 1.0]], rtol=1e-12)


class TestPsi:
    def test_start(self):
        assert tf.psi_point(0.0, 0.0) == (0.0, -1.0)

    def test_top(self):
        alpha = 0.5
        tau = 1 / alpha - 1
        assert tf.psi_point(3.0, tau, tau) == pytest.approx((alpha * 3.0, -alpha))

    def test_domain(self):
        with pytest.raises(tf.DomainError):
            tf.psi_point(0.0, -0.1)
        with pytest.raises(tf.DomainError):
            tf.psi_point(0.0, 1.5, tau=1.0)

    def test_composed_map(self):
        rng = np.random.default_rng(1)
        n = 1e4
        for r, s in zip(rng.uniform(0.5 * n, n, 50), rng.uniform(-0.05, 0.05, 50)):
            got = tf.radial_to_bridge(_polar(r, s), n)[0]
            np.testing.assert_allclose(got, [r * s / math.sqrt(n), -r / n], rtol=1e-12)

    def test_images_in_window(self):
        v = np.column_stack([np.linspace(-2, 2, 11), np.linspace(0, 1, 11)])
        out = tf.psi(v, 1.0)
        assert out[:, 1].min() >= -1.0 and out[:, 1].max() <= -0.5

    def test_ensemble_elementwise(self):
        p = PathPolyline(np.array([[0.5, 0.0], [0.7, 1.0]]))
        ens = tf.psi_ensemble(WebEnsemble([p, p], "rescaled"))
        assert ens.provenance == "psi" and len(ens) == 2
        np.testing.assert_allclose(ens.paths[1].vertices, [[0.5, -1.0], [0.35, -0.5]])


class TestTriangles:
    def test_zero_depth(self, params):
        tp = tf.triangle_prime_image((0.0, 0.0), 0.0, params)
        assert tp.a(0.0) == 0.0
        assert tp.half_width(0.0) == 0.0
        assert tp.height == 0.0
        tri = tf.triangle_double_prime((0.0, 0.0), 0.0, params)
        assert tri.contains(np.array([[0.0, 0.0]]))[0]
        assert not tri.contains(np.array([[1e-9, 0.0]]))[0]

    def test_root_solves_quadratic(self, params):
        tp = tf.triangle_prime_image((0.0, 50.0), 2.0, params)
        c2, r = params.c ** 2, tp.r
        for lp in (0.01, 0.5, 2.0):
            a = tp.a(lp)
            assert a > 0
            lhs = c2 * (lp + a) ** 2 + (r - lp - a) ** 2
            assert lhs == pytest.approx((r - lp) ** 2, rel=1e-14)

    def test_root_small_depth_behaviour(self, params):
        # a(l') ~ c^2 l'^2 / (2 r): the ratio a / l' vanishes with l'
        tp = tf.triangle_prime_image((0.0, 0.0), 1.0, params)
        for lp in (1e-1, 1e-2, 1e-3):
            assert tp.a(lp) / (params.c ** 2 * lp * lp / (2 * tp.r)) == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.xfail(strict=True, reason="ratio a/l' tends to zero, not to a constant")
    def test_root_ratio_constant_example(self, params):
        tp = tf.triangle_prime_image((0.0, 0.0), 1.0, params)
        lp = 1e-3
        want = (1 + params.c ** 2) / (2 * params.n)
        assert tp.a(lp) / lp == pytest.approx(want, rel=0.1)

    def test_no_root_is_geometry_fault(self):
        tp = tf.TrianglePrime(0.0, 0.0, 1.0, 10.0, 1.0)
        with pytest.raises(GeometryError, match="geometry-fault"):
            tp.a(9.9)

    def test_time_offset_monotone_and_inverse(self, params):
        tp = tf.triangle_prime_image((0.0, 300.0), params.log_n, params)
        lps = np.linspace(0, params.log_n, 50)
        offs = np.array([tp.time_offset(x) for x in lps])
        assert np.all(np.diff(offs) > 0)
        np.testing.assert_allclose([tp.depth_at_offset(u) for u in offs], lps, atol=1e-12)

    def test_half_width_close_to_surrogate(self, params):
        tp = tf.triangle_prime_image((0.0, 0.0), params.log_n, params)
        slope = tf.surrogate_slope(0.0, params)
        for u in np.linspace(0.1, tp.height, 10):
            hw = tp.half_width(tp.depth_at_offset(u))
            assert hw == pytest.approx(slope * u, rel=5e-3)

    def test_surrogate_slope_beyond_strip(self, params):
        tn = params.tau * params.n
        assert tf.surrogate_slope(tn + 5, params) == tf.surrogate_slope(tn, params)
        assert tf.surrogate_slope(tn, params) == pytest.approx(params.c_n(tn) / 2)

    @pytest.mark.xfail(strict=True, reason="area scales like (log n)^3 / n at this size")
    def test_area_example(self, params):
        assert tf.symmetric_difference_area(params) < 10 * params.log_n ** 4 / params.n ** 2

    def test_area_scaling(self):
        ratios = []
        for n in (1e4, 1e5, 1e6):
            p = ModelParams(n=n)
            ratios.append(tf.symmetric_difference_area(p) / (p.log_n ** 3 / n))
        assert all(0.1 < r < 0.5 for r in ratios)
        assert max(ratios) / min(ratios) < 1.5


class TestMetric:
    def test_self_distance(self):
        p = PathPolyline(np.array([[0.1, -1.0], [0.3, -0.6], [0.0, -0.25]]))
        assert tf.path_distance(p, p, (-1.0, -0.5, -0.25)) == 0.0

    def test_constant_levels(self):
        p = PathPolyline(np.array([[0.0, 0.0], [0.0, 1.0]]))
        q = PathPolyline(np.array([[1.0, 0.0], [1.0, 1.0]]))
        assert tf.path_distance(p, q, (0.0, 0.5, 1.0)) == pytest.approx(math.tanh(1.0))
        assert math.tanh(1.0) == pytest.approx(0.7616, abs=1e-4)

    def test_endpoint_gap(self):
        p = PathPolyline(np.array([[0.0, 0.0], [0.0, 1.0]]))
        q = PathPolyline(np.array([[0.0, 0.25], [0.0, 1.0]]))
        assert tf.path_distance(p, q, (0.0, 0.5, 1.0)) == pytest.approx(0.25)

    def test_hausdorff(self):
        w = (0.0, 0.5, 1.0)
        p = PathPolyline(np.array([[0.0, 0.0], [0.0, 1.0]]))
        q = PathPolyline(np.array([[0.5, 0.0], [0.2, 1.0]]))
        assert tf.hausdorff_distance([p, q], [q, p], w) == 0.0
        assert tf.hausdorff_distance([p], [q], w) == tf.path_distance(p, q, w)
        assert tf.hausdorff_distance([], [], w) == 0.0
        assert tf.hausdorff_distance([p], [], w) == math.inf

    def test_default_window(self, params):
        assert tf.default_window(params) == (-1.0, -0.5, -0.25)


class TestRestrict:
    def test_interpolated_end(self):
        p = PathPolyline(np.array([[0.0, 0.0], [1.0, 0.5], [3.0, 2.0]]))
        out = tf.restrict_path(p, 1.0)
        np.testing.assert_allclose(out.vertices, [[0.0, 0.0], [1.0, 0.5], [5 / 3, 1.0]])

    def test_late_start_dropped(self):
        ens = WebEnsemble([PathPolyline(np.array([[0.0, 1.5], [0.0, 2.0]]))], "rescaled")
        assert len(tf.restrict_paths(ens, 1.0)) == 0

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        paths = []
        for _ in range(30):
            t = np.sort(rng.uniform(0, 2, 6))
            paths.append(PathPolyline(np.column_stack([rng.normal(size=6), t])))
        ens = WebEnsemble(paths, "rescaled")
        once = tf.restrict_paths(ens, 1.0)
        twice = tf.restrict_paths(once, 1.0)
        assert len(once) == len(twice)
        for a, b in zip(once.paths, twice.paths):
            np.testing.assert_array_equal(a.vertices, b.vertices)
            assert a.t_end <= 1.0
