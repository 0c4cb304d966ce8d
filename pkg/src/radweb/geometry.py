"""Model parameters, derived constants and the successor geometry.

The successor of a point ``x`` lives in a closed quadrangle with apex ``x``
and opposite vertex at the origin. The quadrangle is the intersection of two
cones: the cone at ``x`` of half-angle ``theta`` around the direction to the
origin, and the cone at the origin of half-angle ``pi/2 - theta`` around the
direction to ``x``. The truncated version keeps only the part of the
quadrangle within depth ``l`` of ``x`` (measured in distance to the origin).

Scalar kernels are numba-compiled so that the field and path code can call
them from compiled loops; the public wrappers validate their arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

COS_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid apex or depth handed to a geometric predicate."""


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the radial web.

    Attributes:
        theta: half opening angle of the quadrangle at its apex.
        n: scale parameter, a positive real.
        alpha: inner radius of the annulus as a fraction of ``n``.
        a_exp: exponent of the wide angular window.
        b_exp: exponent of the narrow angular window.
    """

    theta: float = math.pi / 4
    n: float = 1e4
    alpha: float = 0.5
    a_exp: float = 0.3
    b_exp: float = 0.45

    def __post_init__(self) -> None:
        if not 0.0 < self.theta < math.pi / 2:
            raise GeometryError(f"theta must lie in (0, pi/2), got {self.theta}")
        if not 0.0 < self.alpha < 1.0:
            raise GeometryError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.25 < self.a_exp < self.b_exp < 0.5:
            raise GeometryError(
                f"need 1/4 < a_exp < b_exp < 1/2, got a={self.a_exp}, b={self.b_exp}")
        if not (math.isfinite(self.n) and self.n > 1.0):
            raise GeometryError(f"n must be a finite real > 1, got {self.n}")
        if (self.log_n / self.n) * (1.0 + self.tau) >= 1.0:
            raise GeometryError("n too small: truncation depth is undefined on the strip")

    @property
    def c(self) -> float:
        return math.tan(self.theta)

    @property
    def tau(self) -> float:
        return 1.0 / self.alpha - 1.0

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def c_hat(self) -> float:
        """Mean of a nonnegative variable with tail exp(-c v^2)."""
        return 0.5 * math.sqrt(math.pi / self.c)

    @property
    def sigma2(self) -> float:
        """Variance rate per unit time of the limiting paths."""
        return self.c / (3.0 * self.c_hat)

    @property
    def omega_printed(self) -> float:
        """Closed form of the diffusion coefficient as printed in the source."""
        return self.c ** 0.75 / (math.sqrt(6.0) * math.pi ** 0.25)

    @property
    def outer_window(self) -> float:
        """Half-width n^{-a} of the wide angular window."""
        return self.n ** (-self.a_exp)

    @property
    def inner_window(self) -> float:
        """Half-width n^{-b} of the narrow angular window."""
        return self.n ** (-self.b_exp)

    def d(self, s: float) -> float:
        return (1.0 + self.c ** 2) / (2.0 * (1.0 + s / self.n))

    def c_n(self, s: float) -> float:
        return self.c * (1.0 + self.d(s) / self.n)

    def d_prime(self, s: float) -> float:
        g = 1.0 + s / self.n
        den = 1.0 - (self.log_n / self.n) * g
        if den <= 0.0:
            raise GeometryError(f"truncation depth undefined at s={s}")
        return g * g / den

    def trunc_depth(self, s: float) -> float:
        """Truncation depth L_n(s) of the growing triangle."""
        return self.d_prime(s) * self.log_n

    @property
    def a_ext(self) -> float:
        """Rate of the squared waiting time beyond the strip."""
        s = self.tau * self.n
        return self.c_n(s) * (1.0 + self.tau) ** -4

    def derived(self) -> dict[str, float]:
        """Derived constants for manifests (strip quantities at s = 0)."""
        return {
            "c": self.c,
            "tau": self.tau,
            "log_n": self.log_n,
            "c_hat": self.c_hat,
            "sigma2": self.sigma2,
            "omega_printed": self.omega_printed,
            "omega_printed_sq": self.omega_printed ** 2,
            "c_n0": self.c_n(0.0),
            "d_prime0": self.d_prime(0.0),
            "L_n0": self.trunc_depth(0.0),
            "a_ext": self.a_ext,
            "outer_window": self.outer_window,
            "inner_window": self.inner_window,
        }


def to_polar(x1: float, x2: float) -> tuple[float, float]:
    """Return (r, phi) with phi in (-pi, pi]; the origin maps to (0, 0)."""
    r = math.hypot(x1, x2)
    if r == 0.0:
        return 0.0, 0.0
    phi = math.atan2(x2, x1)
    if phi == -math.pi:
        phi = math.pi
    return r, phi


def from_polar(r: float, phi: float) -> tuple[float, float]:
    return r * math.cos(phi), r * math.sin(phi)


@nb.njit(cache=True)
def angle_from_down(x1, x2):
    """Signed angle between (x1, x2) and the downward axis, in (-pi, pi]."""
    s = math.atan2(x2, x1) + 0.5 * math.pi
    if s > math.pi:
        s -= 2.0 * math.pi
    return s


@nb.njit(cache=True)
def in_quadrangle(x1, x2, p1, p2, cos_t, sin_t):
    """Closed quadrangle membership; the apex must differ from the origin."""
    xn = math.hypot(x1, x2)
    d1 = p1 - x1
    d2 = p2 - x2
    dn = math.hypot(d1, d2)
    if dn == 0.0:
        return True
    # cone at the apex around the direction to the origin
    if -(x1 * d1 + x2 * d2) < (cos_t - COS_TOL) * dn * xn:
        return False
    pn = math.hypot(p1, p2)
    if pn == 0.0:
        return True
    # cone at the origin; cos(pi/2 - theta) = sin(theta)
    return p1 * x1 + p2 * x2 >= (sin_t - COS_TOL) * pn * xn


@nb.njit(cache=True)
def in_triangle(x1, x2, l, p1, p2, cos_t, sin_t):
    if math.hypot(p1, p2) < math.hypot(x1, x2) - l:
        return False
    return in_quadrangle(x1, x2, p1, p2, cos_t, sin_t)


@nb.njit(cache=True)
def triangle_reach(xn, l, cos_t):
    """Largest distance from the apex to a point of the truncated quadrangle."""
    k = 2.0 * xn * l - l * l
    u = xn * cos_t
    disc = u * u - k
    if disc < 0.0:
        return xn
    return min(xn, k / (u + math.sqrt(disc)))


@nb.njit(cache=True)
def triangle_bbox(x1, x2, l, cos_t, sin_t):
    """Axis-aligned box containing the truncated quadrangle of depth l."""
    xn = math.hypot(x1, x2)
    R = triangle_reach(xn, l, cos_t) * (1.0 + 1e-9) + 1e-12
    u1 = -x1 / xn
    u2 = -x2 / xn
    lo1 = x1
    hi1 = x1
    lo2 = x2
    hi2 = x2
    # sector of radius R around u with half-angle theta
    for sgn in (-1.0, 1.0):
        e1 = u1 * cos_t - sgn * u2 * sin_t
        e2 = sgn * u1 * sin_t + u2 * cos_t
        q1 = x1 + R * e1
        q2 = x2 + R * e2
        lo1 = min(lo1, q1)
        hi1 = max(hi1, q1)
        lo2 = min(lo2, q2)
        hi2 = max(hi2, q2)
    # axis directions strictly inside the sector extend the box
    if u1 >= cos_t:
        hi1 = max(hi1, x1 + R)
    if -u1 >= cos_t:
        lo1 = min(lo1, x1 - R)
    if u2 >= cos_t:
        hi2 = max(hi2, x2 + R)
    if -u2 >= cos_t:
        lo2 = min(lo2, x2 - R)
    return lo1, hi1, lo2, hi2


def _check_apex(x: tuple[float, float]) -> float:
    xn = math.hypot(x[0], x[1])
    if xn == 0.0:
        raise GeometryError("invalid-apex: the apex must differ from the origin")
    return xn


def quadrangle_contains(x, params: ModelParams, p) -> bool:
    """Whether ``p`` lies in the closed successor quadrangle of ``x``."""
    _check_apex(x)
    return bool(in_quadrangle(float(x[0]), float(x[1]), float(p[0]), float(p[1]),
                              math.cos(params.theta), math.sin(params.theta)))


def triangle_contains(x, l: float, params: ModelParams, p) -> bool:
    """Whether ``p`` lies in the quadrangle of ``x`` truncated at depth ``l``."""
    xn = _check_apex(x)
    if l < 0.0 or l > xn:
        raise GeometryError(f"invalid-depth: l={l} outside [0, {xn}]")
    return bool(in_triangle(float(x[0]), float(x[1]), float(l), float(p[0]), float(p[1]),
                            math.cos(params.theta), math.sin(params.theta)))


def w_point(x, l: float) -> tuple[float, float]:
    """Point on the segment from ``x`` to the origin at distance ``l`` from ``x``."""
    xn = _check_apex(x)
    if l < 0.0 or l > xn:
        raise GeometryError(f"invalid-depth: l={l} outside [0, {xn}]")
    f = (xn - l) / xn
    return x[0] * f, x[1] * f


def quadrangle_vertices(x, params: ModelParams) -> np.ndarray:
    """Vertices (x, y, O, z) of the quadrangle, for plotting and checks."""
    xn = _check_apex(x)
    side = xn * math.cos(params.theta)
    u = -np.asarray(x, dtype=float) / xn
    out = [np.asarray(x, dtype=float)]
    for sgn in (1.0, -1.0):
        ct, st = math.cos(params.theta), sgn * math.sin(params.theta)
        e = np.array([u[0] * ct - u[1] * st, u[0] * st + u[1] * ct])
        out.append(out[0] + side * e)
    return np.array([out[0], out[1], [0.0, 0.0], out[2]])
