"""Coalescing Brownian motions from finite start sets and their bridge images.

Paths move on a time grid with exact Gaussian increments. Two neighbouring
paths coalesce at the first grid time at which their order inverts (or they
coincide); the merged path follows the left one from the linearly
interpolated crossing time on. The oracles below are the closed forms the
simulations are checked against.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .paths import PathPolyline, WebEnsemble
from .transforms import psi


@dataclass
class ReferenceEnsemble:
    starts: np.ndarray
    dt: float
    sigma2: float
    horizon: float
    paths: list[PathPolyline] = field(default_factory=list)
    seed: int | None = None

    def as_web(self) -> WebEnsemble:
        return WebEnsemble(self.paths, "reference", self.seed,
                           {"dt": self.dt, "sigma2": self.sigma2, "horizon": self.horizon})


class _Root:
    """A trajectory that has not merged into its left neighbour yet."""

    __slots__ = ("times", "values", "parent", "merge_time")

    def __init__(self, y: float, s: float):
        self.times = [s]
        self.values = [y]
        self.parent: _Root | None = None
        self.merge_time = math.inf

    @property
    def x(self) -> float:
        return self.values[-1]


def _event_times(starts: np.ndarray, dt: float, horizon: float) -> np.ndarray:
    k = int(math.ceil(horizon / dt - 1e-12))
    grid = np.minimum(np.arange(k + 1) * dt, horizon)
    return np.unique(np.concatenate([grid, starts[:, 1]]))


def _path_of(root: _Root) -> np.ndarray:
    """Own vertices then the parents' vertices after each merge."""
    t = list(root.times)
    v = list(root.values)
    node = root
    while node.parent is not None:
        m = node.merge_time
        par = node.parent
        k = int(np.searchsorted(par.times, m, side="right"))
        t.extend(par.times[k:])
        v.extend(par.values[k:])
        node = par
    return np.column_stack([v, t])


def sample_coalescing_bm(starts, sigma2: float, dt: float, horizon: float,
                         rng: np.random.Generator, seed: int | None = None) -> ReferenceEnsemble:
    """Coalescing Brownian motions with variance rate ``sigma2`` up to ``horizon``.

    ``starts`` is a list of ``(y, s)`` with ``0 <= s <= horizon``. Every path
    ends at ``horizon``.
    """
    if dt <= 0 or sigma2 <= 0:
        raise ValueError("dt and sigma2 must be positive")
    st = np.asarray(starts, dtype=float).reshape(-1, 2)
    if len(st) and (st[:, 1].min() < 0 or st[:, 1].max() > horizon):
        raise ValueError("start times must lie in [0, horizon]")
    times = _event_times(st, dt, horizon)
    by_time: dict[float, list[int]] = {}
    for i, (_, s) in enumerate(st):
        by_time.setdefault(float(s), []).append(i)
    owner: list[_Root | None] = [None] * len(st)
    live: list[_Root] = []
    sd = math.sqrt(sigma2)
    prev_t = times[0]
    for t in times:
        h = t - prev_t
        if h > 0 and live:
            old = np.array([r.x for r in live])
            new = old + sd * math.sqrt(h) * rng.standard_normal(len(live))
            for r, x in zip(live, new):
                r.times.append(float(t))
                r.values.append(float(x))
            live = _merge_inversions(live, old, new, prev_t, h)
        new_here = by_time.get(float(t), [])
        if new_here:
            at = {r.x: r for r in live}
            for i in new_here:
                y = float(st[i, 0])
                hit = at.get(y)
                if hit is None:
                    hit = at[y] = _Root(y, float(t))
                    live.append(hit)
                owner[i] = hit
            live.sort(key=lambda r: r.x)
        prev_t = t
    # a path that starts on an existing trajectory is that trajectory
    paths = []
    for i, r in enumerate(owner):
        p = _path_of(r)
        p = p[p[:, 1] >= st[i, 1]]
        if p[0, 1] > st[i, 1]:
            p = np.vstack([[st[i, 0], st[i, 1]], p])
        paths.append(PathPolyline(p))
    return ReferenceEnsemble(st, dt, sigma2, horizon, paths, seed)


def _merge_inversions(live, old, new, t0, h):
    """Merge neighbours whose order flipped over the last step."""
    out: list[_Root] = []
    olds: list[float] = []
    for r, a, b in zip(live, old, new):
        if out and b <= out[-1].x:
            left = out[-1]
            d0 = a - olds[-1]
            d1 = b - left.x
            frac = d0 / (d0 - d1) if d0 != d1 else 1.0
            tc = t0 + frac * h
            xc = olds[-1] + frac * (left.x - olds[-1])
            r.times[-1] = tc
            r.values[-1] = xc
            r.parent = left
            r.merge_time = tc
            # the left trajectory gets a vertex at the crossing time too
            k = bisect.bisect_right(left.times, tc, 0, len(left.times) - 1)
            left.times.insert(k, tc)
            left.values.insert(k, left.values[k - 1] + (tc - left.times[k - 1])
                               * (left.x - left.values[k - 1]) / (t0 + h - left.times[k - 1]))
            continue
        out.append(r)
        olds.append(float(a))
    return out


def bridge_web(ens: ReferenceEnsemble) -> WebEnsemble:
    """Elementwise psi image: paths on [0, tau] become bridges ending at -1/(1+tau)."""
    return WebEnsemble([PathPolyline(psi(p.vertices)) for p in ens.paths], "bridge", ens.seed,
                       {"sigma2": ens.sigma2, "dt": ens.dt})


def noncoalescence_frequency(eps: float, sigma2: float, t: float, dt: float, trials: int,
                             rng: np.random.Generator, refine: bool = False):
    """Share of two-path systems started ``eps`` apart still apart at ``t``.

    The difference of the two paths is simulated directly. With
    ``refine=True`` the same Brownian paths are also checked on the grid
    of step ``2*dt`` and both frequencies are returned.
    """
    k = int(round(t / dt))
    diff = np.full(trials, float(eps))
    alive = diff > 0
    alive_coarse = alive.copy()
    sd = math.sqrt(2.0 * sigma2 * dt)
    for j in range(k):
        diff += sd * rng.standard_normal(trials)
        alive &= diff > 0
        if j % 2 == 1:
            alive_coarse &= diff > 0
    if refine:
        return float(alive.mean()), float(alive_coarse.mean())
    return float(alive.mean())


def analytic_oracles(kind: str, **args) -> float:
    """Closed forms used as test oracles.

    ``noncoalescence``: 2 Phi(eps / sqrt(2 sigma2 t)) - 1 (args eps, t, sigma2).
    ``density``: 1 / sqrt(pi sigma2 t) (args t, sigma2).
    ``lln``: c_hat r / (1 - c_hat r) (args r, c_hat).
    """
    if kind == "noncoalescence":
        eps, t, s2 = args["eps"], args["t"], args["sigma2"]
        if t <= 0 or s2 <= 0:
            raise ValueError("t and sigma2 must be positive")
        return float(2.0 * norm.cdf(eps / math.sqrt(2.0 * s2 * t)) - 1.0)
    if kind == "density":
        t, s2 = args["t"], args["sigma2"]
        if t <= 0 or s2 <= 0:
            raise ValueError("t and sigma2 must be positive")
        return 1.0 / math.sqrt(math.pi * s2 * t)
    if kind == "lln":
        r, ch = args["r"], args["c_hat"]
        return float(ch * r / (1.0 - ch * r))
    raise ValueError(f"unknown oracle {kind!r}")
