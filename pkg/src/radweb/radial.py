"""Radial paths: successor map, full paths and their modified versions.

A path starts at a field point and repeatedly jumps to the farthest field
point (from the origin) inside the successor quadrangle, reaching the origin
when the quadrangle is empty. Four constructions are provided:

* ``build_gamma``: the full path down to the origin;
* ``clip_gamma_prime``: the same path cut where it first reaches radius
  ``alpha*n``;
* ``modify_gamma_double_prime``: additionally cut at the first vertex that
  leaves the wide angular window, then sent radially to radius ``alpha*n``;
* ``build_hat_gamma``: the variant whose successor search is truncated at
  depth ``log n`` (falling back to the point at depth ``log n`` on the ray)
  and which stops on leaving the wide annular sector.
"""
from __future__ import annotations

import logging
import math

import numba as nb
import numpy as np

from . import geometry as geo
from .field import LazyPointField, Rect, _farthest_core, block_points, farthest_in_triangle
from .geometry import ModelParams
from .paths import PathPolyline, WebEnsemble

log = logging.getLogger(__name__)

STEP_GUARD = 10_000_000


class NonTermination(RuntimeError):
    """The step-count guard tripped while building a path."""


def _require_unit(fld: LazyPointField) -> None:
    if fld.law.kind != "unit":
        raise ValueError("radial paths need a unit-law field")


@nb.njit(cache=True)
def _outside_sector(p1, p2, r_in, win):
    r = math.hypot(p1, p2)
    if r < r_in:
        return True
    return abs(geo.angle_from_down(p1, p2)) > win


@nb.njit(cache=True)
def radial_chain(k0, k1, cs, x1, x2, cos_t, sin_t, hat_depth, r_in, win, max_steps):
    """Vertices of a radial path from (x1, x2).

    With ``hat_depth > 0`` the search is truncated at that depth with the
    on-ray fallback. The path stops after the first vertex outside the sector
    ``{r >= r_in, |angle| <= win}`` or at the origin. Returns the vertex array,
    a fallback flag and a status (0 ok, 1 guard tripped).
    """
    cap = 1024
    out = np.empty((cap, 2))
    out[0, 0] = x1
    out[0, 1] = x2
    m = 1
    fallback = False
    p1 = x1
    p2 = x2
    status = 1
    for _ in range(max_steps):
        if p1 == 0.0 and p2 == 0.0:
            status = 0
            break
        if m > 1 and _outside_sector(p1, p2, r_in, win):
            status = 0
            break
        xn = math.hypot(p1, p2)
        if hat_depth > 0.0:
            l = min(hat_depth, xn)
            found, q1, q2, _, _, _ = farthest_in_triangle(k0, k1, cs, p1, p2, l, cos_t, sin_t)
            if not found:
                f = (xn - l) / xn
                q1 = p1 * f
                q2 = p2 * f
                fallback = True
        else:
            found, q1, q2, _, _, _ = farthest_in_triangle(k0, k1, cs, p1, p2, xn, cos_t, sin_t)
            if not found:
                q1 = 0.0
                q2 = 0.0
        if m == cap:
            cap *= 2
            grown = np.empty((cap, 2))
            grown[:m] = out[:m]
            out = grown
        out[m, 0] = q1
        out[m, 1] = q2
        m += 1
        p1 = q1
        p2 = q2
    return out[:m].copy(), fallback, status


def _args(fld: LazyPointField, params: ModelParams):
    return fld.k0, fld.k1, fld.cell_size, math.cos(params.theta), math.sin(params.theta)


def successor(x, fld: LazyPointField, params: ModelParams) -> tuple[float, float]:
    """Farthest field point in the quadrangle of ``x``, or the origin."""
    _require_unit(fld)
    x1, x2 = float(x[0]), float(x[1])
    xn = math.hypot(x1, x2)
    if xn == 0.0:
        raise geo.GeometryError("invalid-apex: the apex must differ from the origin")
    k0, k1, cs, ct, st = _args(fld, params)
    found, q1, q2, *_ = farthest_in_triangle(k0, k1, cs, x1, x2, xn, ct, st)
    return (q1, q2) if found else (0.0, 0.0)


def build_gamma(x, fld: LazyPointField, params: ModelParams, stop_radius: float = 0.0,
                max_steps: int = STEP_GUARD) -> PathPolyline:
    """Path from ``x`` to the origin.

    With ``stop_radius > 0`` the path is cut after its first vertex at radius
    at most ``stop_radius``; clipping only needs that prefix.
    """
    _require_unit(fld)
    k0, k1, cs, ct, st = _args(fld, params)
    r_in = np.nextafter(stop_radius, np.inf) if stop_radius > 0 else 0.0
    v, _, status = radial_chain(k0, k1, cs, float(x[0]), float(x[1]), ct, st, 0.0,
                                r_in, np.inf, max_steps)
    if status:
        raise NonTermination(f"more than {max_steps} steps from {tuple(x)}")
    return PathPolyline(v)


def _circle_hit(p, q, radius):
    """Parameter t in [0, 1] where the segment p->q crosses the circle."""
    d = q - p
    a = d @ d
    b = 2 * p @ d
    c = p @ p - radius * radius
    if a == 0.0:
        return 0.0
    disc = max(b * b - 4 * a * c, 0.0)
    # p is outside (or on) the circle and q inside: the smaller root
    t = (-b - math.sqrt(disc)) / (2 * a)
    return min(max(t, 0.0), 1.0)


def _ray_hit(p, q, phi):
    """Parameter t where the segment p->q meets the line through O at angle phi."""
    e = np.array([-math.sin(phi), math.cos(phi)])
    fp = p @ e
    fq = q @ e
    if fp == fq:
        return math.inf
    t = fp / (fp - fq)
    return t if 0.0 <= t <= 1.0 else math.inf


def clip_gamma_prime(path: PathPolyline, params: ModelParams) -> PathPolyline:
    """Cut the path where it first reaches radius ``alpha * n``."""
    r_in = params.alpha * params.n
    v = path.vertices
    r = np.hypot(v[:, 0], v[:, 1])
    if r[0] < r_in:
        raise ValueError("invalid-input: path starts inside radius alpha*n")
    idx = np.flatnonzero(r <= r_in)
    if len(idx) == 0:
        return PathPolyline(v.copy(), path.fallback)
    k = int(idx[0])
    if k == 0 or r[k] == r_in:
        return PathPolyline(v[:k + 1].copy(), path.fallback)
    t = _circle_hit(v[k - 1], v[k], r_in)
    end = v[k - 1] + t * (v[k] - v[k - 1])
    return PathPolyline(np.vstack([v[:k], end]), path.fallback)


def _radial_end(p, params: ModelParams) -> np.ndarray:
    phi = math.atan2(p[1], p[0])
    rad = params.alpha * params.n
    return np.array([rad * math.cos(phi), rad * math.sin(phi)])


def modify_gamma_double_prime(path: PathPolyline, params: ModelParams) -> PathPolyline:
    """Cut a clipped path at its first wide-angle vertex and go radially inward.

    Only vertices before the final clip point are inspected.
    """
    v = path.vertices
    win = params.outer_window
    inner = v[:-1] if len(v) > 1 else v
    sig = np.array([abs(geo.angle_from_down(a, b)) for a, b in inner])
    out = np.flatnonzero(sig > win)
    if len(out) == 0:
        return PathPolyline(v.copy(), path.fallback)
    k = max(int(out[0]), 1)
    return PathPolyline(np.vstack([v[:k], _radial_end(v[k - 1], params)]), path.fallback)


def _hat_terminal(prev: np.ndarray, last: np.ndarray, params: ModelParams):
    """Terminal point and exit kind for an edge leaving the wide sector."""
    r_in = params.alpha * params.n
    win = params.outer_window
    t_top = _circle_hit(prev, last, r_in) if math.hypot(*last) < r_in else math.inf
    t_side = math.inf
    if abs(geo.angle_from_down(last[0], last[1])) > win:
        for sgn in (-1.0, 1.0):
            t_side = min(t_side, _ray_hit(prev, last, -0.5 * math.pi + sgn * win))
    if t_top <= t_side:
        return prev + t_top * (last - prev), "top"
    return _radial_end(prev, params), "side"


def build_hat_gamma(x, fld: LazyPointField, params: ModelParams,
                    max_steps: int = STEP_GUARD) -> PathPolyline:
    """Variant path from ``x``, ending on the boundary of the wide sector."""
    _require_unit(fld)
    k0, k1, cs, ct, st = _args(fld, params)
    r_in = params.alpha * params.n
    win = params.outer_window
    v, fb, status = radial_chain(k0, k1, cs, float(x[0]), float(x[1]), ct, st,
                                 params.log_n, r_in, win, max_steps)
    if status:
        raise NonTermination(f"more than {max_steps} steps from {tuple(x)}")
    exit_kind = "none"
    if len(v) > 1 and _outside_sector(v[-1, 0], v[-1, 1], r_in, win):
        end, exit_kind = _hat_terminal(v[-2], v[-1], params)
        v = np.vstack([v[:-1], end])
    return PathPolyline(v, fb, exit_kind)


def build_gamma_double_prime(x, fld: LazyPointField, params: ModelParams) -> PathPolyline:
    full = build_gamma(x, fld, params, stop_radius=params.alpha * params.n)
    return modify_gamma_double_prime(clip_gamma_prime(full, params), params)


# ---------------------------------------------------------------- ensembles

def sector_bbox(params: ModelParams, win: float, margin: float = 0.0):
    """Bounding box of {alpha*n <= r <= n, |angle from down| <= win}."""
    n, r_in = params.n, params.alpha * params.n
    half = n * math.sin(win)
    return (-half - margin, half + margin, -n - margin, -r_in * math.cos(win) + margin)


def _in_sector(pts: np.ndarray, r_in: float, r_out: float, win: float) -> np.ndarray:
    r = np.hypot(pts[:, 0], pts[:, 1])
    sig = np.arctan2(pts[:, 1], pts[:, 0]) + 0.5 * math.pi
    sig = np.where(sig > math.pi, sig - 2 * math.pi, sig)
    return (r >= r_in) & (r <= r_out) & (np.abs(sig) <= win)


class Sector:
    """Annular sector {alpha*n <= r <= n, |angle from down| <= win} as a query region."""

    def __init__(self, params: ModelParams, win: float):
        self.params, self.win = params, win

    def bbox(self):
        return sector_bbox(self.params, self.win)

    def contains(self, pts):
        p = self.params
        return _in_sector(pts, p.alpha * p.n, p.n, self.win)


def starts_in_lambda(fld: LazyPointField, params: ModelParams, wide: bool = False) -> np.ndarray:
    """Field points in the narrow (or wide) annular sector, sorted by (x2, x1)."""
    _require_unit(fld)
    win = params.outer_window if wide else params.inner_window
    return fld.points_in(Sector(params, win), cache=False)


def stratified_starts(fld: LazyPointField, params: ModelParams, count: int,
                      band: float = 8.0) -> np.ndarray:
    """One start per angular stratum of the narrow window, near radius n.

    Stratum ``k`` targets the angle at the center of the k-th of ``count``
    equal slices of the narrow window; the start is the farthest field
    point of the narrow sector in a ``band`` x ``band`` box around the
    target at radius ``n - band/2``.
    """
    _require_unit(fld)
    win = params.inner_window
    n = params.n
    rt = n - band / 2.0
    out = []
    for k in range(count):
        sig = win * (-1.0 + (2.0 * k + 1.0) / count)
        cx, cy = rt * math.sin(sig), -rt * math.cos(sig)
        box = Rect(cx - band / 2, cx + band / 2, cy - band / 2, cy + band / 2)
        pts = fld.points_in(box)
        pts = pts[_in_sector(pts, params.alpha * n, n, win)] if len(pts) else pts
        if len(pts):
            out.append(pts[np.argmax(np.hypot(pts[:, 0], pts[:, 1]))])
    return np.array(out).reshape(-1, 2)


def radial_ensemble(fld: LazyPointField, params: ModelParams, starts, provenance: str) -> WebEnsemble:
    """Paths of one construction from every start point."""
    builders = {
        "gamma": lambda x: build_gamma(x, fld, params),
        "gamma_prime": lambda x: clip_gamma_prime(
            build_gamma(x, fld, params, stop_radius=params.alpha * params.n), params),
        "gamma_double_prime": lambda x: build_gamma_double_prime(x, fld, params),
        "hat_gamma": lambda x: build_hat_gamma(x, fld, params),
    }
    make = builders[provenance]
    paths = [make(x) for x in np.asarray(starts, dtype=float)]
    return WebEnsemble(paths, provenance, fld.seed, {"n": params.n, "theta": params.theta})


# ---------------------------------------------------------------- agreement

@nb.njit(cache=True)
def _exit_is_top(p1, p2, q1, q2, r_in, win):
    """Whether the edge leaves through the inner circle, and its crossing parameter."""
    # mirrors _hat_terminal: compare crossing parameters of the circle and the rays
    d1 = q1 - p1
    d2 = q2 - p2
    t_top = math.inf
    if math.hypot(q1, q2) < r_in:
        a = d1 * d1 + d2 * d2
        b = 2.0 * (p1 * d1 + p2 * d2)
        c = p1 * p1 + p2 * p2 - r_in * r_in
        disc = max(b * b - 4.0 * a * c, 0.0)
        t_top = min(max((-b - math.sqrt(disc)) / (2.0 * a), 0.0), 1.0)
    t_side = math.inf
    if abs(geo.angle_from_down(q1, q2)) > win:
        for sgn in (-1.0, 1.0):
            phi = -0.5 * math.pi + sgn * win
            e1 = -math.sin(phi)
            e2 = math.cos(phi)
            fp = p1 * e1 + p2 * e2
            fq = q1 * e1 + q2 * e2
            if fp != fq:
                t = fp / (fp - fq)
                if 0.0 <= t <= 1.0:
                    t_side = min(t_side, t)
    return t_top <= t_side, t_top


@nb.njit(cache=True)
def _agreement_walk(k0, k1, cs, pts, starts, i0, i1, j0, j1, offsets, counts,
                    cos_t, sin_t, depth, r_in, win):
    """Memoised walk along successor chains from each start.

    Per-point state packs four bits: computed, agree, fallback, side exit.
    Paths from different starts coalesce quickly, so each walk stops at the
    first point already resolved and the result is copied back along the
    chain. The smallest and largest angle on the rest of the path travel
    with it. Returns the state of every start and its largest angular
    displacement from the start.
    """
    state = np.zeros(len(pts), dtype=np.int8)
    lo = np.empty(len(pts))
    hi = np.empty(len(pts))
    chain = np.empty(1024, dtype=np.int64)
    ni = i1 - i0 + 1
    disp = np.empty(len(starts))
    for si in range(len(starts)):
        m = 0
        g = starts[si]
        while state[g] == 0:
            x1 = pts[g, 0]
            x2 = pts[g, 1]
            ag = geo.angle_from_down(x1, x2)
            found, q1, q2, qi, qj, qk = _farthest_core(k0, k1, cs, x1, x2,
                                                       min(depth, math.hypot(x1, x2)),
                                                       cos_t, sin_t, pts, offsets, counts,
                                                       i0, i1, j0, j1)
            if not found:
                # the on-ray fallback keeps the angle
                state[g] = 1 | 4
                lo[g] = ag
                hi[g] = ag
                break
            rq = math.hypot(q1, q2)
            aq = geo.angle_from_down(q1, q2)
            if rq >= r_in and abs(aq) <= win:
                if m == len(chain):
                    grown = np.empty(2 * m, dtype=np.int64)
                    grown[:m] = chain
                    chain = grown
                chain[m] = g
                m += 1
                g = offsets[(qj - j0) * ni + (qi - i0)] + qk
                continue
            if rq >= r_in:
                # side exits end radially below the last inside vertex
                state[g] = 1 | 2 | 8
                ae = ag
            else:
                top, t = _exit_is_top(x1, x2, q1, q2, r_in, win)
                if top:
                    state[g] = 1 | 2
                    ae = geo.angle_from_down(x1 + t * (q1 - x1), x2 + t * (q2 - x2))
                else:
                    state[g] = 1 | 8
                    ae = ag
            lo[g] = min(ag, ae)
            hi[g] = max(ag, ae)
        for k in range(m - 1, -1, -1):
            h = chain[k]
            a = geo.angle_from_down(pts[h, 0], pts[h, 1])
            state[h] = state[g]
            lo[h] = min(a, lo[g])
            hi[h] = max(a, hi[g])
            g = h
        g = starts[si]
        a = geo.angle_from_down(pts[g, 0], pts[g, 1])
        disp[si] = max(hi[g] - a, a - lo[g])
    return state[starts], disp


def agreement_counts(fld: LazyPointField, params: ModelParams) -> dict:
    """Compare variant and modified paths from every point of the narrow sector.

    All points of the wide sector are generated once. Successors are only
    computed for points on some path from a narrow-sector start, and agreement
    of the two constructions propagates along the shared suffixes.
    ``max_lateral`` is the largest lateral displacement of a variant path in
    strip units, ``n`` times the angle swept away from its start.
    """
    _require_unit(fld)
    depth = params.log_n
    margin = (1.0 + params.c) * depth + 2.0
    win = params.outer_window
    r_in = params.alpha * params.n
    i0, i1, j0, j1 = fld.cell_range(sector_bbox(params, win, margin))
    pts, ids = block_points(fld.k0, fld.k1, 0, 1.0, 1.0, fld.cell_size, i0, i1, j0, j1)
    ni = i1 - i0 + 1
    cell_lin = (ids[:, 1] - j0) * ni + (ids[:, 0] - i0)
    counts = np.bincount(cell_lin, minlength=ni * (j1 - j0 + 1)).astype(np.int64)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    starts = np.flatnonzero(_in_sector(pts, r_in, params.n, params.inner_window))
    state, disp = _agreement_walk(fld.k0, fld.k1, fld.cell_size, pts, starts, i0, i1, j0, j1,
                            offsets, counts, math.cos(params.theta), math.sin(params.theta),
                            depth, r_in, win)
    return {
        "starts": int(len(starts)),
        "agree": int(np.count_nonzero(state & 2)),
        "fallback_paths": int(np.count_nonzero(state & 4)),
        "side_exits": int(np.count_nonzero(state & 8)),
        "max_lateral": float(params.n * disp.max()) if len(disp) else 0.0,
    }
