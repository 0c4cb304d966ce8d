from __future__ import annotations

import math

import numpy as np
import pytest

from radweb import radial as rd
from radweb import transforms as tf
from radweb.field import LazyPointField, Quadrangle
from radweb.geometry import ModelParams, quadrangle_contains
from radweb.paths import PathPolyline


def _brute_successor(x, fld, params):
    pts = fld.points_in(Quadrangle(tuple(x), params.theta))
    pts = pts[np.hypot(pts[:, 0] - x[0], pts[:, 1] - x[1]) > 0]
    if len(pts) == 0:
        return (0.0, 0.0)
    q = pts[np.argmax(np.hypot(pts[:, 0], pts[:, 1]))]
    return float(q[0]), float(q[1])


def _starts(fld, params, k):
    st = rd.starts_in_lambda(fld, params)
    idx = np.linspace(0, len(st) - 1, k).round().astype(int)
    return st[idx]


class TestSuccessor:
    def test_matches_brute_force(self):
        p = ModelParams(n=200.0)
        fld = LazyPointField(4)
        rng = np.random.default_rng(1)
        for _ in range(40):
            x = rng.uniform(-30, 30, size=2)
            s = rd.successor(x, fld, p)
            assert s == _brute_successor(x, fld, p)
            if s != (0.0, 0.0):
                assert quadrangle_contains(x, p, s)
                assert math.hypot(*s) < math.hypot(*x)

    def test_empty_quadrangle_gives_origin(self, params):
        # a point very close to the origin has a tiny quadrangle
        fld = LazyPointField(1)
        pts = fld.points_in(Quadrangle((0.0, -1e-3), params.theta))
        if len(pts) == 0:
            assert rd.successor((0.0, -1e-3), fld, params) == (0.0, 0.0)


class TestGamma:
    def test_chain_matches_repeated_successor(self):
        p = ModelParams(n=100.0)
        fld = LazyPointField(2)
        for x in _starts(fld, p, 5):
            path = rd.build_gamma(x, fld, p)
            cur = tuple(x)
            for v in path.vertices[1:]:
                cur = _brute_successor(cur, fld, p)
                assert cur == (v[0], v[1])
            assert tuple(path.end) == (0.0, 0.0)

    def test_radii_strictly_decreasing(self, params):
        fld = LazyPointField(3)
        for x in _starts(fld, params, 20):
            r = rd.build_gamma(x, fld, params, stop_radius=params.alpha * params.n).radii()
            assert np.all(np.diff(r) < 0)

    def test_step_guard(self, params):
        fld = LazyPointField(3)
        x = _starts(fld, params, 1)[0]
        with pytest.raises(rd.NonTermination):
            rd.build_gamma(x, fld, params, max_steps=3)

    def test_shared_vertex_means_shared_suffix(self, params):
        fld = LazyPointField(5)
        st = rd.starts_in_lambda(fld, params)
        st = st[np.argsort(st[:, 0])][:40]
        paths = [rd.build_gamma(x, fld, params, stop_radius=params.alpha * params.n)
                 for x in st]
        merged = 0
        for a, b in zip(paths, paths[1:]):
            va = {tuple(v): i for i, v in enumerate(a.vertices)}
            common = [(va[tuple(v)], j) for j, v in enumerate(b.vertices) if tuple(v) in va]
            if common:
                merged += 1
                i, j = common[0]
                tail = min(len(a) - i, len(b) - j)
                np.testing.assert_array_equal(a.vertices[i:i + tail], b.vertices[j:j + tail])
        assert merged > 0


class TestClip:
    def test_axis_example(self):
        p = ModelParams(n=10.0, alpha=0.5)
        path = PathPolyline(np.array([[0.0, -6.0], [0.0, -4.0], [0.0, 0.0]]))
        out = rd.clip_gamma_prime(path, p)
        np.testing.assert_allclose(out.end, (0.0, -5.0))
        assert len(out) == 2

    def test_vertex_on_circle(self):
        p = ModelParams(n=10.0, alpha=0.5)
        path = PathPolyline(np.array([[0.0, -6.0], [3.0, -4.0], [0.0, -1.0]]))
        out = rd.clip_gamma_prime(path, p)
        np.testing.assert_array_equal(out.end, (3.0, -4.0))

    def test_mid_edge_line_circle_oracle(self):
        p = ModelParams(n=10.0, alpha=0.5)
        a, b = np.array([1.0, -7.0]), np.array([-2.0, -2.0])
        out = rd.clip_gamma_prime(PathPolyline(np.array([a, b])), p)
        # solve |a + t (b - a)| = 5 by the quadratic formula
        d = b - a
        qa, qb, qc = d @ d, 2 * a @ d, a @ a - 25.0
        t = (-qb - math.sqrt(qb * qb - 4 * qa * qc)) / (2 * qa)
        np.testing.assert_allclose(out.end, a + t * d, rtol=1e-12)
        assert math.hypot(*out.end) == pytest.approx(5.0, abs=1e-9 * 10)

    def test_inside_start_rejected(self):
        p = ModelParams(n=10.0, alpha=0.5)
        with pytest.raises(ValueError, match="invalid-input"):
            rd.clip_gamma_prime(PathPolyline(np.array([[0.0, -4.0], [0.0, 0.0]])), p)

    def test_random_paths_end_on_circle(self, params):
        fld = LazyPointField(6)
        r_in = params.alpha * params.n
        for x in _starts(fld, params, 10):
            full = rd.build_gamma(x, fld, params, stop_radius=r_in)
            out = rd.clip_gamma_prime(full, params)
            assert abs(math.hypot(*out.end) - r_in) <= 1e-9 * params.n
            assert np.all(out.radii()[:-1] > r_in)


class TestModify:
    def _polar_path(self, n, angles, radii):
        return PathPolyline(np.array([[r * math.sin(a), -r * math.cos(a)]
                                      for a, r in zip(angles, radii)]))

    def test_no_exit_is_identity(self, params):
        path = self._polar_path(params.n, [0.0, 0.01, -0.02, 0.0], [1e4, 9e3, 7e3, 5e3])
        out = rd.modify_gamma_double_prime(path, params)
        np.testing.assert_array_equal(out.vertices, path.vertices)

    def test_first_vertex_outside(self, params):
        path = self._polar_path(params.n, [0.2, 0.1, 0.0], [1e4, 8e3, 5e3])
        out = rd.modify_gamma_double_prime(path, params)
        assert len(out) == 2
        np.testing.assert_array_equal(out.start, path.start)
        assert math.hypot(*out.end) == pytest.approx(params.alpha * params.n)

    def test_exit_at_step_three(self, params):
        win = params.outer_window
        path = self._polar_path(params.n, [0.0, 0.01, 0.02, 2 * win, 0.0],
                                [1e4, 9e3, 8e3, 7e3, 5e3])
        out = rd.modify_gamma_double_prime(path, params)
        assert len(out) == 4
        np.testing.assert_array_equal(out.vertices[:3], path.vertices[:3])
        end = out.end
        assert math.hypot(*end) == pytest.approx(params.alpha * params.n)
        assert math.atan2(end[1], end[0]) == pytest.approx(
            math.atan2(path.vertices[2, 1], path.vertices[2, 0]))

    def test_kept_vertices_inside_window(self, params):
        fld = LazyPointField(8)
        for x in _starts(fld, params, 20):
            out = rd.build_gamma_double_prime(x, fld, params)
            sig = np.abs(np.arctan2(out.vertices[:-1, 1], out.vertices[:-1, 0]) + math.pi / 2)
            assert np.all(sig <= params.outer_window)


class TestHatGamma:
    def test_first_step_matches_gamma_when_shallow(self, params):
        fld = LazyPointField(9)
        checked = 0
        for x in _starts(fld, params, 30):
            s = rd.successor(x, fld, params)
            if math.hypot(*x) - math.hypot(*s) <= params.log_n:
                hat = rd.build_hat_gamma(x, fld, params)
                assert tuple(hat.vertices[1]) == s or len(hat) == 2
                checked += 1
        assert checked > 20

    def test_steps_within_depth(self, params):
        fld = LazyPointField(10)
        for x in _starts(fld, params, 20):
            r = rd.build_hat_gamma(x, fld, params).radii()
            assert np.all(np.diff(r) < 0)
            assert np.all(-np.diff(r) <= params.log_n * (1 + 1e-12))

    def test_stays_in_wide_sector(self, params):
        fld = LazyPointField(11)
        lim = params.n ** (1 - params.a_exp)
        for x in _starts(fld, params, 20):
            hat = rd.build_hat_gamma(x, fld, params)
            strip = tf.xi(hat.vertices, params.n)
            assert np.abs(strip[:, 0]).max() <= lim * (1 + 1e-9)

    def test_time_increases_after_transform(self, params):
        fld = LazyPointField(12)
        for x in _starts(fld, params, 20):
            strip = tf.xi(rd.build_gamma_double_prime(x, fld, params).vertices, params.n)
            assert np.all(np.diff(strip[:, 1]) > 0)


def test_agreement_counts_match_direct_construction():
    # cached dynamic programme against building every pair of paths
    p = ModelParams(n=300.0)
    fld = LazyPointField(13)
    fast = rd.agreement_counts(fld, p)
    starts = rd.starts_in_lambda(fld, p)
    agree = 0
    lateral = 0.0
    for x in starts:
        a = rd.build_hat_gamma(x, fld, p)
        b = rd.build_gamma_double_prime(x, fld, p)
        if len(a) == len(b) and np.allclose(a.vertices, b.vertices, rtol=0, atol=1e-9):
            agree += 1
        ang = np.arctan2(a.vertices[:, 1], a.vertices[:, 0])
        lateral = max(lateral, p.n * float(np.max(np.abs(ang - ang[0]))))
    assert fast["starts"] == len(starts)
    assert fast["agree"] == agree
    assert fast["max_lateral"] == pytest.approx(lateral, rel=1e-9)


def test_stratified_starts_in_narrow_sector(params):
    fld = LazyPointField(14)
    st = rd.stratified_starts(fld, params, 16)
    assert 12 <= len(st) <= 16
    sig = np.arctan2(st[:, 1], st[:, 0]) + math.pi / 2
    assert np.all(np.abs(sig) <= params.inner_window)
    r = np.hypot(st[:, 0], st[:, 1])
    assert np.all((r <= params.n) & (r >= params.n - 8.0 * math.sqrt(2)))


def test_lateral_excursions_rare():
    from radweb.suites import lateral_report
    p = ModelParams(n=1e3)
    lat = [rd.agreement_counts(LazyPointField(seed), p)["max_lateral"] for seed in range(100)]
    rep = lateral_report(lat, p)
    assert rep.meta["seeds"] == 100 and rep.passed
