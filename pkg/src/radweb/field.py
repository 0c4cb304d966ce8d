"""Deterministic, lazily materialized Poisson point fields.

Three intensity laws are supported on a grid of square cells:

* ``unit``: rate 1 on the whole plane (the radial picture);
* ``transformed``: rate ``(1 + s/n)^-3`` on the strip ``0 <= s <= tau*n``;
* ``extended``: the transformed law continued by the constant
  ``(1 + tau)^-3`` above the strip.

The points of cell ``(i, j)`` are a pure function of the seed, the cell
coordinates and the law, generated from a Philox block keyed on the seed.
Cell counts are Poisson by inverse CDF; positions are uniform across the
cell and follow the normalized intensity along the time axis. Both strip laws
draw from the same keys, so the extended field agrees with the transformed
one on every cell that lies inside the strip.

Coordinates are ``(x1, x2)``; in the strip ``x1`` is space and ``x2`` time.
"""
from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from pathlib import Path

import numba as nb
import numpy as np

from . import geometry as geo
from .rng import DOMAIN_FIELD, as_word, make_key, philox_block, to_unit
from .stats import InsufficientData, StatsReport, chi_square

UNIT, TRANSFORMED, EXTENDED = 0, 1, 2
_KINDS = {"unit": UNIT, "transformed": TRANSFORMED, "extended": EXTENDED}
_CACHE_LIMIT = 1 << 18
_MAX_POINTS = 4096


class DomainViolation(ValueError):
    """A query reaches outside the support of the intensity law."""


@dataclass(frozen=True)
class IntensityLaw:
    kind: str = "unit"
    n: float = 1.0
    tau: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown law {self.kind!r}")
        if self.kind != "unit" and not (self.n > 0 and self.tau > 0):
            raise ValueError("strip laws need n > 0 and tau > 0")

    @property
    def code(self) -> int:
        return _KINDS[self.kind]

    @property
    def s_max(self) -> float:
        if self.kind == "transformed":
            return self.tau * self.n
        return math.inf

    def intensity(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "unit":
            return np.ones_like(s)
        g = 1.0 + np.minimum(s, self.tau * self.n) / self.n
        out = g ** -3.0
        out = np.where(s < 0, 0.0, out)
        if self.kind == "transformed":
            out = np.where(s > self.tau * self.n, 0.0, out)
        return out

    def mass(self, s_lo: float, s_hi: float) -> float:
        """Integral of the intensity over [s_lo, s_hi] per unit width."""
        if self.kind == "unit":
            return max(s_hi - s_lo, 0.0)
        return float(_time_mass(self.code, self.n, self.tau, s_lo, s_hi))


@nb.njit(cache=True)
def _power_mass(n, lo, hi):
    # integral of (1 + s/n)^-3 over [lo, hi], written to avoid cancellation
    if hi <= lo:
        return 0.0
    g1 = 1.0 + lo / n
    g2 = 1.0 + hi / n
    return (hi - lo) * (g1 + g2) / (2.0 * g1 * g1 * g2 * g2)


@nb.njit(cache=True)
def _time_mass(kind, n, tau, lo, hi):
    if kind == UNIT:
        return max(hi - lo, 0.0)
    lo = max(lo, 0.0)
    top = tau * n
    m = _power_mass(n, lo, min(hi, top))
    if kind == EXTENDED and hi > top:
        m += (1.0 + tau) ** -3 * (hi - max(lo, top))
    return m


@nb.njit(cache=True)
def _power_quantile(n, lo, hi, u):
    g1 = 1.0 + lo / n
    g2 = 1.0 + hi / n
    span = (hi - lo) * (g1 + g2) / (n * g1 * g1 * g2 * g2)
    g = 1.0 / math.sqrt(1.0 / (g1 * g1) - u * span)
    s = n * (g - 1.0)
    return min(max(s, lo), hi)


@nb.njit(cache=True)
def _time_quantile(kind, n, tau, lo, hi, u):
    """Inverse CDF of the normalized intensity on the time interval [lo, hi]."""
    if kind == UNIT:
        return lo + u * (hi - lo)
    lo = max(lo, 0.0)
    top = tau * n
    if kind == TRANSFORMED or hi <= top:
        return _power_quantile(n, lo, min(hi, top), u)
    m1 = _power_mass(n, lo, min(hi, top))
    m2 = (1.0 + tau) ** -3 * (hi - max(lo, top))
    w = u * (m1 + m2)
    if w < m1:
        return _power_quantile(n, lo, top, w / m1)
    b = max(lo, top)
    return min(b + (w - m1) / (1.0 + tau) ** -3, hi)


@nb.njit(cache=True)
def _law_tag(kind):
    return 0 if kind == UNIT else 1


@nb.njit(cache=True)
def cell_count(k0, k1, kind, n, tau, cs, i, j):
    mean = cs * _time_mass(kind, n, tau, j * cs, (j + 1) * cs)
    if mean <= 0.0:
        return 0
    w0, _, _, _ = philox_block(as_word(i), as_word(j), np.uint64(0),
                               np.uint64(_law_tag(kind)), k0, k1)
    u = to_unit(w0)
    p = math.exp(-mean)
    cdf = p
    k = 0
    while u >= cdf and k < _MAX_POINTS:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0:
            break
    return k


@nb.njit(cache=True)
def cell_point(k0, k1, kind, n, tau, cs, i, j, k):
    w0, w1, _, _ = philox_block(as_word(i), as_word(j), as_word(k + 1),
                                np.uint64(_law_tag(kind)), k0, k1)
    x = (i + to_unit(w0)) * cs
    t = _time_quantile(kind, n, tau, j * cs, (j + 1) * cs, to_unit(w1))
    return x, t


@nb.njit(cache=True)
def block_points(k0, k1, kind, n, tau, cs, i0, i1, j0, j1):
    """All points of the cells i0..i1 x j0..j1 (inclusive), with cell ids."""
    ni = i1 - i0 + 1
    nj = j1 - j0 + 1
    counts = np.zeros(ni * nj, dtype=np.int64)
    for a in range(nj):
        for b in range(ni):
            counts[a * ni + b] = cell_count(k0, k1, kind, n, tau, cs, i0 + b, j0 + a)
    total = counts.sum()
    pts = np.empty((total, 2))
    ids = np.empty((total, 3), dtype=np.int64)
    m = 0
    for a in range(nj):
        for b in range(ni):
            for k in range(counts[a * ni + b]):
                x, t = cell_point(k0, k1, kind, n, tau, cs, i0 + b, j0 + a, k)
                pts[m, 0] = x
                pts[m, 1] = t
                ids[m, 0] = i0 + b
                ids[m, 1] = j0 + a
                ids[m, 2] = k
                m += 1
    return pts, ids


# ---------------------------------------------------------------- queries

@nb.njit(cache=True)
def _better(r, p1, p2, best_r, b1, b2):
    # larger radius wins; ties go to larger x1, then larger x2
    if r > best_r:
        return True
    if r == best_r:
        if p1 > b1:
            return True
        if p1 == b1 and p2 > b2:
            return True
    return False


_NO_PTS = np.empty((0, 2))
_NO_IDX = np.empty(0, dtype=np.int64)


@nb.njit(cache=True)
def _farthest_core(k0, k1, cs, x1, x2, lmax, cos_t, sin_t,
                   cpts, coff, ccnt, ci0, ci1, cj0, cj1):
    xn = math.hypot(x1, x2)
    ni = ci1 - ci0 + 1
    best_r = -1.0
    b1 = 0.0
    b2 = 0.0
    bi = 0
    bj = 0
    bk = -1
    have = False
    oi0 = 1
    oi1 = 0
    oj0 = 1
    oj1 = 0
    l = cs
    while True:
        lk = min(l, lmax)
        lo1, hi1, lo2, hi2 = geo.triangle_bbox(x1, x2, lk, cos_t, sin_t)
        i0 = int(math.floor(lo1 / cs))
        i1 = int(math.floor(hi1 / cs))
        j0 = int(math.floor(lo2 / cs))
        j1 = int(math.floor(hi2 / cs))
        for j in range(j0, j1 + 1):
            for i in range(i0, i1 + 1):
                if oi0 <= i <= oi1 and oj0 <= j <= oj1:
                    continue
                stored = ci0 <= i <= ci1 and cj0 <= j <= cj1
                if stored:
                    c = (j - cj0) * ni + (i - ci0)
                    base = coff[c]
                    cnt = ccnt[c]
                else:
                    base = 0
                    cnt = cell_count(k0, k1, UNIT, 1.0, 1.0, cs, i, j)
                for k in range(cnt):
                    if stored:
                        p1 = cpts[base + k, 0]
                        p2 = cpts[base + k, 1]
                    else:
                        p1, p2 = cell_point(k0, k1, UNIT, 1.0, 1.0, cs, i, j, k)
                    if p1 == x1 and p2 == x2:
                        continue
                    if not geo.in_triangle(x1, x2, lmax, p1, p2, cos_t, sin_t):
                        continue
                    r = math.hypot(p1, p2)
                    if not have or _better(r, p1, p2, best_r, b1, b2):
                        have = True
                        best_r = r
                        b1 = p1
                        b2 = p2
                        bi = i
                        bj = j
                        bk = k
        # boxes grow with the depth, so the newest box covers all scanned cells
        oi0 = i0
        oi1 = i1
        oj0 = j0
        oj1 = j1
        if have and best_r >= xn - lk:
            break
        if lk >= lmax:
            break
        l = 2.0 * l
    return have, b1, b2, bi, bj, bk


@nb.njit(cache=True)
def farthest_in_triangle(k0, k1, cs, x1, x2, lmax, cos_t, sin_t):
    """Farthest-from-origin unit-law point in the truncated quadrangle.

    The apex itself is excluded. Cells are scanned in growing depth rings so
    that the typical query touches a handful of cells. Returns
    ``(found, p1, p2, i, j, k)`` with the cell and rank of the point found.
    """
    return _farthest_core(k0, k1, cs, x1, x2, lmax, cos_t, sin_t,
                          _NO_PTS, _NO_IDX, _NO_IDX, 1, 0, 1, 0)


@nb.njit(cache=True)
def first_hit(k0, k1, kind, n, tau, cs, y, s, slope, vmax):
    """Minimal-time point above ``s`` in the upward triangle at ``(y, s)``.

    The triangle has half-width ``slope * u`` at depth ``u <= vmax``.
    Returns ``(found, x, t)``.
    """
    best_t = math.inf
    bx = 0.0
    top_all = s + vmax
    j = int(math.floor(s / cs))
    while True:
        row_lo = j * cs
        if row_lo > top_all:
            break
        row_hi = (j + 1) * cs
        hw = slope * (min(row_hi, top_all) - s)
        i0 = int(math.floor((y - hw) / cs))
        i1 = int(math.floor((y + hw) / cs))
        for i in range(i0, i1 + 1):
            cnt = cell_count(k0, k1, kind, n, tau, cs, i, j)
            for k in range(cnt):
                px, pt = cell_point(k0, k1, kind, n, tau, cs, i, j, k)
                if pt <= s or pt > top_all:
                    continue
                if abs(px - y) > slope * (pt - s):
                    continue
                if pt < best_t or (pt == best_t and px < bx):
                    best_t = pt
                    bx = px
        if best_t <= row_hi:
            break
        j += 1
    return best_t < math.inf, bx, best_t


# ---------------------------------------------------------------- regions

@dataclass(frozen=True)
class Rect:
    x_lo: float
    x_hi: float
    s_lo: float
    s_hi: float

    def bbox(self):
        return self.x_lo, self.x_hi, self.s_lo, self.s_hi

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return ((pts[:, 0] >= self.x_lo) & (pts[:, 0] < self.x_hi)
                & (pts[:, 1] >= self.s_lo) & (pts[:, 1] < self.s_hi))


@dataclass(frozen=True)
class RadialTriangle:
    """The quadrangle of ``apex`` truncated at depth ``l`` (None for no cut)."""

    apex: tuple[float, float]
    theta: float
    l: float | None = None

    def _depth(self) -> float:
        xn = math.hypot(*self.apex)
        return xn if self.l is None else self.l

    def bbox(self):
        x1, x2 = self.apex
        if math.hypot(x1, x2) == 0.0:
            raise geo.GeometryError("invalid-apex: the apex must differ from the origin")
        return geo.triangle_bbox(x1, x2, self._depth(), math.cos(self.theta), math.sin(self.theta))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        x1, x2 = self.apex
        ct, st = math.cos(self.theta), math.sin(self.theta)
        l = self._depth()
        return np.array([geo.in_triangle(x1, x2, l, p[0], p[1], ct, st) for p in pts], dtype=bool)


def Quadrangle(apex, theta) -> RadialTriangle:
    return RadialTriangle(tuple(apex), theta, None)


@dataclass(frozen=True)
class PlanarTriangle:
    """Upward triangle with apex (y, s), half-width slope*u up to depth v."""

    apex: tuple[float, float]
    slope: float
    v: float

    def bbox(self):
        y, s = self.apex
        hw = self.slope * self.v
        return y - hw, y + hw, s, s + self.v

    def contains(self, pts: np.ndarray) -> np.ndarray:
        y, s = self.apex
        u = pts[:, 1] - s
        return (u >= 0) & (u <= self.v) & (np.abs(pts[:, 0] - y) <= self.slope * u)


# ---------------------------------------------------------------- field

class LazyPointField:
    """A Poisson field whose cells are generated on first use.

    Args:
        seed: non-negative integer seed.
        law: intensity law of the field.
        cell_size: side of the square grid cells.
    """

    def __init__(self, seed: int, law: IntensityLaw | None = None, cell_size: float = 1.0):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.seed = int(seed)
        self.law = law or IntensityLaw("unit")
        self.cell_size = float(cell_size)
        self.k0, self.k1 = make_key(self.seed, DOMAIN_FIELD)
        self.materialized_cells: dict[tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def kernel_args(self):
        """Positional arguments identifying the field inside compiled kernels."""
        return (self.k0, self.k1, self.law.code, float(self.law.n), float(self.law.tau),
                self.cell_size)

    def cell(self, i: int, j: int) -> np.ndarray:
        key = (int(i), int(j))
        pts = self.materialized_cells.get(key)
        if pts is None:
            pts, _ = block_points(*self.kernel_args, key[0], key[0], key[1], key[1])
            pts = pts[np.lexsort((pts[:, 0], pts[:, 1]))]
            with self._lock:
                if len(self.materialized_cells) >= _CACHE_LIMIT:
                    self.materialized_cells.clear()
                self.materialized_cells.setdefault(key, pts)
        return pts

    def _check_domain(self, s_lo: float, s_hi: float) -> None:
        if self.law.kind == "unit":
            return
        if s_hi < 0 or s_lo > self.law.s_max:
            raise DomainViolation(f"time range [{s_lo}, {s_hi}] outside the law's support")

    def cell_range(self, bbox) -> tuple[int, int, int, int]:
        x_lo, x_hi, s_lo, s_hi = bbox
        cs = self.cell_size
        return (math.floor(x_lo / cs), math.floor(x_hi / cs),
                math.floor(s_lo / cs), math.floor(s_hi / cs))

    def points_in(self, region, cache: bool | None = None) -> np.ndarray:
        """All field points inside ``region``, sorted by (x2, x1)."""
        x_lo, x_hi, s_lo, s_hi = region.bbox()
        if not all(math.isfinite(v) for v in (x_lo, x_hi, s_lo, s_hi)):
            raise ValueError("query bounding box must be finite")
        if x_hi <= x_lo or s_hi <= s_lo:
            return np.empty((0, 2))
        self._check_domain(s_lo, s_hi)
        i0, i1, j0, j1 = self.cell_range((x_lo, x_hi, s_lo, s_hi))
        ncell = (i1 - i0 + 1) * (j1 - j0 + 1)
        if cache is None:
            cache = ncell <= 4096
        if cache:
            parts = [self.cell(i, j) for j in range(j0, j1 + 1) for i in range(i0, i1 + 1)]
            pts = np.concatenate(parts) if parts else np.empty((0, 2))
        else:
            pts, _ = block_points(*self.kernel_args, i0, i1, j0, j1)
        pts = pts[region.contains(pts)] if len(pts) else pts
        return pts[np.lexsort((pts[:, 0], pts[:, 1]))]


def first_hit_in_growing_triangle(fld: LazyPointField, apex, slope: float, v_max: float):
    """Minimal-time field point in the growing triangle, with its depth."""
    if slope <= 0 or v_max <= 0:
        raise ValueError("slope and v_max must be positive")
    found, x, t = first_hit(*fld.kernel_args, float(apex[0]), float(apex[1]),
                            float(slope), float(v_max))
    if not found:
        return None
    return (x, t), t - float(apex[1])


def farthest_from_origin_in(fld: LazyPointField, shape: RadialTriangle):
    """Farthest field point from the origin in a radial shape, apex excluded."""
    if fld.law.kind != "unit":
        raise DomainViolation("radial queries need the unit law")
    x1, x2 = map(float, shape.apex)
    xn = math.hypot(x1, x2)
    if xn == 0.0:
        raise geo.GeometryError("invalid-apex: the apex must differ from the origin")
    l = shape._depth()
    if l < 0 or l > xn:
        raise geo.GeometryError(f"invalid-depth: l={l} outside [0, {xn}]")
    found, p1, p2, *_ = farthest_in_triangle(fld.k0, fld.k1, fld.cell_size, x1, x2, l,
                                             math.cos(shape.theta), math.sin(shape.theta))
    return (p1, p2) if found else None


def chi_square_intensity_test(points: np.ndarray, law: IntensityLaw, x_range, s_range,
                              bins=20, min_expected: float = 20.0,
                              name: str = "intensity") -> StatsReport:
    """Chi-square of binned point counts against the integrated intensity.

    ``bins`` is either a number of time bins or a pair ``(space, time)``.
    Counts are treated as independent Poisson variables.
    """
    bx, bt = (1, bins) if np.isscalar(bins) else bins
    xe = np.linspace(x_range[0], x_range[1], bx + 1)
    se = np.linspace(s_range[0], s_range[1], bt + 1)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    counts, _, _ = np.histogram2d(pts[:, 0], pts[:, 1], bins=[xe, se])
    expected = np.array([[(xe[a + 1] - xe[a]) * law.mass(se[b], se[b + 1]) for b in range(bt)]
                         for a in range(bx)])
    if np.any(expected < min_expected):
        raise InsufficientData(f"expected count per bin below {min_expected}")
    rep = chi_square(counts, expected, name=name, poisson=True, min_expected=min_expected)
    rep.meta.update({"law": getattr(law, "kind", type(law).__name__),
                     "n": getattr(law, "n", None), "tau": getattr(law, "tau", None),
                     "points": len(pts)})
    return rep


def write_points_csv(points: np.ndarray, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2"])
        for a, b in np.asarray(points, dtype=float):
            w.writerow([f"{a:.17g}", f"{b:.17g}"])
