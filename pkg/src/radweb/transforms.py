"""Coordinate maps between the radial plane, the strip and the bridge window.

* ``xi`` sends ``r e^{i(-pi/2 + sigma)}`` to ``(n sigma, n^2/r - n)``: the angle
  becomes space and the radius becomes time, so paths heading to the origin
  become paths moving up the strip.
* ``rescale`` is the diffusive scaling ``(x1/sqrt(n), x2/n)``.
* ``psi`` sends ``(y, s)`` to ``(y/(1+s), -1/(1+s))``, turning the strip
  ``[0, tau]`` into the time window ``[-1, -alpha]``.

Also here: the exact image of the radial search triangle and its linear
surrogate, the path metric and its Hausdorff lift, and time restriction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .field import PlanarTriangle
from .geometry import GeometryError, ModelParams
from .paths import PathPolyline, WebEnsemble

GRID_POINTS = 2048


class DomainError(ValueError):
    """A point lies outside the domain of a map."""


def _as_points(p) -> np.ndarray:
    a = np.asarray(p, dtype=float)
    return a.reshape(-1, 2)


def xi(points, n: float) -> np.ndarray:
    """Radial plane to strip."""
    p = _as_points(points)
    r = np.hypot(p[:, 0], p[:, 1])
    if np.any(r == 0):
        raise DomainError("the origin has no image in the strip")
    sig = np.arctan2(p[:, 1], p[:, 0]) + 0.5 * math.pi
    sig = np.where(sig > math.pi, sig - 2 * math.pi, sig)
    return np.column_stack([n * sig, n * n / r - n])


def xi_inverse(points, n: float) -> np.ndarray:
    """Strip to radial plane."""
    p = _as_points(points)
    if np.any(p[:, 1] <= -n):
        raise DomainError("time must exceed -n")
    r = n * n / (p[:, 1] + n)
    sig = p[:, 0] / n
    return np.column_stack([r * np.sin(sig), -r * np.cos(sig)])


def rescale(points, n: float) -> np.ndarray:
    p = _as_points(points)
    return np.column_stack([p[:, 0] / math.sqrt(n), p[:, 1] / n])


def psi(points, tau: float | None = None) -> np.ndarray:
    """Strip (rescaled) to the bridge window; checks ``0 <= s <= tau``."""
    p = _as_points(points)
    s = p[:, 1]
    tol = 1e-12
    if np.any(s < -tol) or (tau is not None and np.any(s > tau + tol)):
        raise DomainError("psi needs s in [0, tau]")
    g = 1.0 + s
    return np.column_stack([p[:, 0] / g, -1.0 / g])


def psi_point(y: float, s: float, tau: float | None = None) -> tuple[float, float]:
    out = psi([[y, s]], tau)[0]
    return float(out[0]), float(out[1])


def radial_to_bridge(points, n: float) -> np.ndarray:
    """Composition psi(rescale(xi(.))): equals (r sigma / sqrt(n), -r / n)."""
    return psi(rescale(xi(points, n), n))


def map_path(path: PathPolyline, fn) -> PathPolyline:
    return PathPolyline(fn(path.vertices), path.fallback, path.exit)


def psi_path(path: PathPolyline, tau: float | None = None) -> PathPolyline:
    return map_path(path, lambda v: psi(v, tau))


def psi_ensemble(ens: WebEnsemble, tau: float | None = None) -> WebEnsemble:
    return ens.map(lambda p: psi_path(p, tau), "psi")


def radial_paths_to_rescaled(ens: WebEnsemble, n: float) -> WebEnsemble:
    """Rescale radial paths directly: value x1/sqrt(n), time x2/n."""
    return ens.map(lambda p: map_path(p, lambda v: rescale(v, n)), "rescaled")


def radial_paths_to_bridge(ens: WebEnsemble, n: float) -> WebEnsemble:
    """Send radial path vertices through the strip to the bridge window.

    Edges are joined linearly between the mapped vertices.
    """
    return ens.map(lambda p: map_path(p, lambda v: radial_to_bridge(v, n)), "psi")


# ---------------------------------------------------------------- triangles

@dataclass(frozen=True)
class TrianglePrime:
    """Exact strip image of the radial search triangle with apex time ``s``.

    The apex sits at radius ``r = n / (1 + s/n)``. The circle of radius
    ``r - l'`` maps to the time ``s + time_offset(l')`` and its intersection
    with the quadrangle maps to an interval of half-width ``half_width(l')``.
    """

    y: float
    s: float
    l: float
    n: float
    c: float

    @property
    def r(self) -> float:
        return self.n / (1.0 + self.s / self.n)

    def a(self, lp: float) -> float:
        """Smaller root of (1+c^2) a^2 + 2(c^2 l' - (r - l')) a + c^2 l'^2 = 0."""
        c2 = self.c * self.c
        A = 1.0 + c2
        B = 2.0 * (c2 * lp - (self.r - lp))
        C = c2 * lp * lp
        disc = B * B - 4.0 * A * C
        if disc < 0 or B >= 0:
            raise GeometryError("geometry-fault: no admissible root")
        if C == 0.0:
            return 0.0
        return 2.0 * C / (-B + math.sqrt(disc))

    def half_width(self, lp: float) -> float:
        a = self.a(lp)
        return self.n * math.asin(self.c * (lp + a) / (self.r - lp))

    def time_offset(self, lp: float) -> float:
        g = 1.0 + self.s / self.n
        return g * g * lp / (1.0 - (lp / self.n) * g)

    def depth_at_offset(self, u: float) -> float:
        """Inverse of ``time_offset``."""
        g = 1.0 + self.s / self.n
        return u / (g * g + u * g / self.n)

    @property
    def height(self) -> float:
        return self.time_offset(self.l)


def triangle_prime_image(apex, l: float, params: ModelParams) -> TrianglePrime:
    """Exact image triangle for a strip apex ``(y, s)`` and radial depth ``l``."""
    if l < 0 or l > params.log_n + 1e-12:
        raise ValueError("depth must lie in [0, log n]")
    return TrianglePrime(float(apex[0]), float(apex[1]), float(l), params.n, params.c)


def surrogate_slope(s: float, params: ModelParams) -> float:
    """Half-width growth rate of the linear triangle with apex time ``s``."""
    tn = params.tau * params.n
    if s >= tn:
        return params.c_n(tn) / (1.0 + params.tau)
    return params.c_n(s) / (1.0 + s / params.n)


def triangle_double_prime(apex, v: float, params: ModelParams) -> PlanarTriangle:
    """Linear surrogate triangle of depth ``v`` above ``apex = (y, s)``."""
    y, s = float(apex[0]), float(apex[1])
    return PlanarTriangle((y, s), surrogate_slope(s, params), float(v))


def symmetric_difference_area(params: ModelParams, s: float = 0.0) -> float:
    """Area between the exact image triangle of depth log n and its surrogate.

    Both sets are unions of centered horizontal intervals over the same time
    span, so the area is the integral of twice the half-width mismatch.
    """
    tp = TrianglePrime(0.0, s, params.log_n, params.n, params.c)
    slope = surrogate_slope(s, params)
    H = tp.height

    def gap(u: float) -> float:
        return 2.0 * abs(tp.half_width(tp.depth_at_offset(u)) - slope * u)

    val, _ = integrate.quad(gap, 0.0, H, limit=200)
    return float(val)


# ---------------------------------------------------------------- metrics

def default_window(params: ModelParams) -> tuple[float, float, float]:
    return (-1.0, -params.alpha, -params.alpha / 2.0)


def _times(p: PathPolyline) -> tuple[np.ndarray, np.ndarray]:
    return p.vertices[:, 1], p.vertices[:, 0]


def path_distance(p: PathPolyline, q: PathPolyline, window) -> float:
    """Sup-tanh distance of constant-extended paths plus endpoint-time gaps."""
    beta, _, beta2 = window
    tp, fp = _times(p)
    tq, fq = _times(q)
    grid = np.concatenate([np.linspace(beta, beta2, GRID_POINTS), tp, tq])
    grid = grid[(grid >= beta) & (grid <= beta2)]
    d = max(abs(tp[0] - tq[0]), abs(tp[-1] - tq[-1]))
    if len(grid):
        fs = np.tanh(np.interp(grid, tp, fp))
        gs = np.tanh(np.interp(grid, tq, fq))
        d = max(d, float(np.max(np.abs(fs - gs))))
    return float(d)


def distance_matrix(e1, e2, window) -> np.ndarray:
    return np.array([[path_distance(p, q, window) for q in e2] for p in e1])


def hausdorff_distance(e1, e2, window) -> float:
    e1, e2 = list(e1), list(e2)
    if not e1 and not e2:
        return 0.0
    if not e1 or not e2:
        return math.inf
    m = distance_matrix(e1, e2, window)
    return float(max(m.min(axis=1).max(), m.min(axis=0).max()))


def restrict_path(p: PathPolyline, tau: float) -> PathPolyline | None:
    v = p.vertices
    if v[0, 1] > tau:
        return None
    keep = v[v[:, 1] <= tau]
    if v[-1, 1] > tau and keep[-1, 1] < tau:
        x = float(np.interp(tau, v[:, 1], v[:, 0]))
        keep = np.vstack([keep, [x, tau]])
    return PathPolyline(keep, p.fallback, p.exit)


def restrict_paths(ens: WebEnsemble, tau: float) -> WebEnsemble:
    """Clip every path at time ``tau`` and drop paths starting after it."""
    out = [q for q in (restrict_path(p, tau) for p in ens.paths) if q is not None]
    return WebEnsemble(out, ens.provenance, ens.seed, dict(ens.meta))
