"""Strip-coordinate paths: the exact increment chain and geometric paths.

The chain draws each step from the closed-form law of the first point in a
growing triangle: the waiting time ``T`` has tail

    P(T > v) = exp(-c_n(s) v^2 / ((1 + s/n)^2 (1 + (s + v)/n)^2)),  v < L_n(s),

with an atom at the truncation depth ``L_n(s)``, and the spatial jump is
uniform on the triangle's top side. Beyond the strip top ``tau*n`` the tail
becomes ``exp(-a v^2)`` with constant ``a``.

The geometric paths step through an actual strip field with the same
triangles, so the two constructions agree in law but never pathwise.
Shared-field pairs, paths chasing a recorded path, and the web of paths
crossing a time slice are all built from that geometric step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numba as nb
import numpy as np

from .field import EXTENDED, TRANSFORMED, IntensityLaw, LazyPointField, block_points, first_hit
from .geometry import ModelParams
from .paths import PathPolyline, WebEnsemble
from .rng import DOMAIN_FIELD, DOMAIN_STREAM, make_key, split_word, stream_uniforms
from .stats import COINCIDENCE_TOL, distinct_count

MAX_STEPS = 50_000_000


class DomainViolation(ValueError):
    """A strip-regime draw was requested outside the strip."""


class NonCrossingFault(RuntimeError):
    """Two paths of one field changed spatial order without meeting."""


# ---------------------------------------------------------------- kernels

@nb.njit(cache=True, inline="always")
def _c_n(c, n, s):
    return c * (1.0 + (1.0 + c * c) / (2.0 * (1.0 + s / n)) / n)


@nb.njit(cache=True, inline="always")
def _trunc(n, log_n, s):
    g = 1.0 + s / n
    return g * g / (1.0 - (log_n / n) * g) * log_n


@nb.njit(cache=True)
def _wait_strip(e, s, c, n, log_n):
    cn = _c_n(c, n, s)
    g = 1.0 + s / n
    lim = _trunc(n, log_n, s)
    q = math.sqrt(e / cn)
    den = 1.0 - q * g / n
    if den <= 0.0:
        return lim, True
    v = q * g * g / den
    if v >= lim:
        return lim, True
    return v, False


@nb.njit(cache=True)
def _wait_ext(e, c, n, tau, log_n):
    top = tau * n
    rate = _c_n(c, n, top) * (1.0 + tau) ** -4
    lim = _trunc(n, log_n, top)
    v = math.sqrt(e / rate)
    if v >= lim:
        return lim, True
    return v, False


@nb.njit(cache=True, inline="always")
def _slope_depth(s, c, n, tau, log_n):
    top = tau * n
    if s < top:
        return _c_n(c, n, s) / (1.0 + s / n), _trunc(n, log_n, s)
    return _c_n(c, n, top) / (1.0 + tau), _trunc(n, log_n, top)


@nb.njit(cache=True)
def _increment(e, u, s, c, n, tau, log_n):
    """(T, X, truncated) from an Exp(1) draw ``e`` and ``u`` uniform on [-1, 1]."""
    if s < tau * n:
        t, tr = _wait_strip(e, s, c, n, log_n)
    else:
        t, tr = _wait_ext(e, c, n, tau, log_n)
    slope, _ = _slope_depth(s, c, n, tau, log_n)
    x = 0.0 if tr else slope * t * u
    return t, x, tr


@nb.njit(cache=True, inline="always")
def _stream_draw(k0, k1, pid, i):
    u0, u1, _, _ = stream_uniforms(k0, k1, pid, i, 0)
    return -math.log1p(-u0), 2.0 * u1 - 1.0


@nb.njit(cache=True)
def _push(buf, k, x, t):
    if k == buf.shape[0]:
        nb_ = np.empty((2 * k, 2))
        nb_[:k] = buf
        buf = nb_
    buf[k, 0] = x
    buf[k, 1] = t
    return buf


@nb.njit(cache=True)
def _chain_path(k0, k1, pid, y, s, horizon, c, n, tau, log_n, max_steps):
    buf = np.empty((64, 2))
    buf[0, 0] = y
    buf[0, 1] = s
    k = 1
    i = 0
    ntr = 0
    while s < horizon:
        if i >= max_steps:
            return buf[:k], ntr, False
        e, u = _stream_draw(k0, k1, pid, i)
        t, x, tr = _increment(e, u, s, c, n, tau, log_n)
        i += 1
        ntr += tr
        if s + t > horizon:
            x = x * (horizon - s) / t
            t = horizon - s
        y += x
        s += t
        buf = _push(buf, k, y, s)
        k += 1
    return buf[:k], ntr, True


@nb.njit(cache=True, parallel=True)
def _chain_sums(k0, k1, pid0, chains, idx, s0, c, n, tau, log_n):
    out = np.empty((chains, len(idx)))
    last = idx[-1]
    for ch in nb.prange(chains):
        s = s0
        j = 0
        while j < len(idx) and idx[j] == 0:
            out[ch, j] = s
            j += 1
        for i in range(last):
            e, u = _stream_draw(k0, k1, pid0 + ch, i)
            t, _, _ = _increment(e, u, s, c, n, tau, log_n)
            s += t
            while j < len(idx) and idx[j] == i + 1:
                out[ch, j] = s
                j += 1
    return out


@nb.njit(cache=True, parallel=True)
def _chain_values(k0, k1, pid0, chains, y0, s0, times, c, n, tau, log_n):
    """Linearly interpolated chain value at each of the sorted ``times``."""
    out = np.empty((chains, len(times)))
    steps = np.zeros(chains, dtype=np.int64)
    trunc = np.zeros(chains, dtype=np.int64)
    for ch in nb.prange(chains):
        y = y0
        s = s0
        j = 0
        i = 0
        while j < len(times):
            if times[j] <= s:
                out[ch, j] = y
                j += 1
                continue
            e, u = _stream_draw(k0, k1, pid0 + ch, i)
            t, x, tr = _increment(e, u, s, c, n, tau, log_n)
            i += 1
            trunc[ch] += tr
            while j < len(times) and times[j] <= s + t:
                out[ch, j] = y + x * (times[j] - s) / t
                j += 1
            y += x
            s += t
        steps[ch] = i
    return out, steps, trunc


@nb.njit(cache=True)
def _chain_first(k0, k1, pid0, count, y, s, c, n, tau, log_n):
    out = np.empty((count, 3))
    for k in range(count):
        e, u = _stream_draw(k0, k1, pid0 + k, 0)
        t, x, tr = _increment(e, u, s, c, n, tau, log_n)
        out[k, 0] = t
        out[k, 1] = x
        out[k, 2] = tr
    return out


@nb.njit(cache=True)
def _geo_step(k0, k1, kind, n, tau, cs, c, log_n, y, s):
    slope, depth = _slope_depth(s, c, n, tau, log_n)
    found, x, t = first_hit(k0, k1, kind, n, tau, cs, y, s, slope, depth)
    if found:
        return x, t, False
    return y, s + depth, True


@nb.njit(cache=True)
def _geo_path(k0, k1, kind, n, tau, cs, c, log_n, y, s, horizon, max_steps):
    buf = np.empty((64, 2))
    buf[0, 0] = y
    buf[0, 1] = s
    k = 1
    fb = 0
    i = 0
    while s < horizon:
        if i >= max_steps:
            return buf[:k], fb, False
        x, t, f = _geo_step(k0, k1, kind, n, tau, cs, c, log_n, y, s)
        i += 1
        fb += f
        if t > horizon:
            x = y + (x - y) * (horizon - s) / (t - s)
            t = horizon
        y = x
        s = t
        buf = _push(buf, k, y, s)
        k += 1
    return buf[:k], fb, True


@nb.njit(cache=True)
def _pair_run(k0, k1, kind, n, tau, cs, c, log_n, y_left, y_right, t0, horizon,
              max_steps, record):
    """Two paths of one field, always advancing the one behind in time.

    Returns ``(nu, violations, steps, left_vertices, right_vertices)``; ``nu``
    is inf when the paths are still apart at ``horizon``. The order of the
    jump versions is checked at every vertex time once both values there
    are known.
    """
    va = np.empty((64 if record else 1, 2))
    vb = np.empty((64 if record else 1, 2))
    na = 0
    nb_ = 0
    if record:
        va = _push(va, 0, y_left, t0)
        vb = _push(vb, 0, y_right, t0)
        na = 1
        nb_ = 1
    if y_left == y_right:
        return 0.0, 0, 0, va[:na], vb[:nb_]
    ay, at, ap = y_left, t0, y_left
    by, bt, bp = y_right, t0, y_right
    steps = 0
    viol = 0
    nu = math.inf
    while steps < max_steps:
        if at <= bt:
            if at >= horizon:
                break
            x, t, _ = _geo_step(k0, k1, kind, n, tau, cs, c, log_n, ay, at)
            steps += 1
            if record:
                va = _push(va, na, x, t)
                na += 1
            if x == by and t == bt:
                nu = t - t0
                break
            # order at the other path's pending vertex, then at our new time
            if at <= bt < t and not ay < by:
                viol += 1
            if t < bt and not x < bp:
                viol += 1
            ap, ay, at = ay, x, t
        else:
            if bt >= horizon:
                break
            x, t, _ = _geo_step(k0, k1, kind, n, tau, cs, c, log_n, by, bt)
            steps += 1
            if record:
                vb = _push(vb, nb_, x, t)
                nb_ += 1
            if x == ay and t == at:
                nu = t - t0
                break
            if bt <= at < t and not by > ay:
                viol += 1
            if t < at and not x > ap:
                viol += 1
            bp, by, bt = by, x, t
    if nu > horizon - t0:
        nu = math.inf
    return nu, viol, steps, va[:na], vb[:nb_]


@nb.njit(cache=True, parallel=True)
def _pair_batch(seed_word, trials, kind, n, tau, cs, c, log_n, gap, t0, horizon, max_steps):
    nu = np.empty(len(trials))
    viol = np.zeros(len(trials), dtype=np.int64)
    steps = np.zeros(len(trials), dtype=np.int64)
    k1 = np.uint64(DOMAIN_FIELD)
    for a in nb.prange(len(trials)):
        k0 = split_word(seed_word, trials[a])
        r = _pair_run(k0, k1, kind, n, tau, cs, c, log_n, 0.0, gap, t0, horizon,
                      max_steps, False)
        nu[a] = r[0]
        viol[a] = r[1]
        steps[a] = r[2]
    return nu, viol, steps


@nb.njit(cache=True)
def _chase(k0, k1, kind, n, tau, cs, c, log_n, ref, y, s, horizon, max_steps):
    """Run from ``(y, s)``, right of the recorded path ``ref``, until it joins it.

    Returns ``(join_time, violations)``; join time is inf past ``horizon``.
    """
    rt = ref[:, 1]
    viol = 0
    for _ in range(max_steps):
        if s >= horizon:
            break
        x, t, _ = _geo_step(k0, k1, kind, n, tau, cs, c, log_n, y, s)
        if t > horizon:
            break
        j = np.searchsorted(rt, t)
        if j < len(rt) and rt[j] == t and ref[j, 0] == x:
            return t, viol
        # the reference may not jump past our old value while we wait
        lo = np.searchsorted(rt, s, side="right")
        for q in range(lo, j):
            if ref[q, 0] >= y:
                viol += 1
                break
        if x <= ref[max(j - 1, 0), 0]:
            viol += 1
        y = x
        s = t
    return math.inf, viol


@nb.njit(cache=True, parallel=True)
def _chase_batch(seed_word, reals, kind, n, tau, cs, c, log_n, y0, s0, horizon, offsets,
                 probe_times, max_steps):
    R = len(reals)
    join = np.empty((R, len(offsets)))
    probe = np.empty((R, len(probe_times)))
    viol = np.zeros(R, dtype=np.int64)
    fb = np.zeros(R, dtype=np.int64)
    k1 = np.uint64(DOMAIN_FIELD)
    for a in nb.prange(R):
        k0 = split_word(seed_word, reals[a])
        ref, f, _ = _geo_path(k0, k1, kind, n, tau, cs, c, log_n, y0, s0, horizon, max_steps)
        fb[a] = f
        for q in range(len(probe_times)):
            probe[a, q] = np.interp(probe_times[q], ref[:, 1], ref[:, 0])
        for b in range(len(offsets)):
            jt, v = _chase(k0, k1, kind, n, tau, cs, c, log_n, ref, y0 + offsets[b], s0,
                           horizon, max_steps)
            join[a, b] = jt
            viol[a] += v
    return join, probe, viol, fb


@nb.njit(cache=True)
def _touching(k0, k1, kind, n, tau, cs, c, log_n, x_lo, x_hi, T):
    lmax = _trunc(n, log_n, min(T, tau * n))
    i0 = int(math.floor(x_lo / cs))
    i1 = int(math.floor(x_hi / cs))
    j0 = int(math.floor(max(T - lmax, 0.0) / cs))
    j1 = int(math.floor(T / cs))
    pts, _ = block_points(k0, k1, kind, n, tau, cs, i0, i1, j0, j1)
    keep = np.zeros(len(pts), dtype=np.bool_)
    for q in range(len(pts)):
        x = pts[q, 0]
        s = pts[q, 1]
        if x < x_lo or x >= x_hi or s >= T:
            continue
        slope, depth = _slope_depth(s, c, n, tau, log_n)
        if s + depth <= T:
            continue
        found, _, _ = first_hit(k0, k1, kind, n, tau, cs, x, s, slope, T - s)
        keep[q] = not found
    out = pts[keep]
    return out[np.argsort(out[:, 0], kind="mergesort")]


@nb.njit(cache=True)
def _resolve(j, t, merge, parent):
    """Path whose own vertices carry trajectory ``j`` at time ``t``."""
    while merge[j] < t:
        j = parent[j]
    return j


@nb.njit(cache=True)
def _left_violations(verts, off, merge, parent, j0, y, s, t):
    """Vertices of trajectory ``j0`` in (s, t) that are not left of ``y``."""
    bad = 0
    u = s
    while True:
        j = j0
        while merge[j] <= u:
            j = parent[j]
        a, b = off[j], off[j + 1]
        q = a + np.searchsorted(verts[a:b, 1], u, side="right")
        while q < b and verts[q, 1] < t:
            if verts[q, 0] >= y:
                bad += 1
            q += 1
        if merge[j] >= t:
            return bad
        u = merge[j]


@nb.njit(cache=True)
def _touch_web(k0, k1, kind, n, tau, cs, c, log_n, starts, horizon, max_steps):
    """Paths from the sorted slice points, each run until it joins its left neighbour."""
    m = len(starts)
    verts = np.empty((max(64, 4 * m), 2))
    off = np.zeros(m + 1, dtype=np.int64)
    merge = np.full(m, math.inf)
    parent = np.full(m, -1, dtype=np.int64)
    viol = 0
    fb = 0
    k = 0
    for i in range(m):
        y = starts[i, 0]
        s = starts[i, 1]
        off[i] = k
        verts = _push(verts, k, y, s)
        k += 1
        for _ in range(max_steps):
            if s >= horizon:
                break
            x, t, f = _geo_step(k0, k1, kind, n, tau, cs, c, log_n, y, s)
            fb += f
            if t > horizon:
                x = y + (x - y) * (horizon - s) / (t - s)
                t = horizon
            verts = _push(verts, k, x, t)
            k += 1
            if i > 0:
                viol += _left_violations(verts, off, merge, parent, i - 1, y, s, t)
            y = x
            s = t
            if i == 0 or t >= horizon:
                continue
            j = _resolve(i - 1, t, merge, parent)
            a, b = off[j], off[j + 1]
            jt = verts[a:b, 1]
            q = np.searchsorted(jt, t)
            if q < len(jt) and jt[q] == t and verts[a + q, 0] == x:
                merge[i] = t
                parent[i] = j
                break
            if x <= verts[a + max(q - 1, 0), 0]:
                viol += 1
        off[i + 1] = k
    return verts[:k], off, merge, parent, viol, fb


# ---------------------------------------------------------------- python API

@dataclass(frozen=True)
class IncrementSample:
    T: float
    X: float
    truncated: bool


@dataclass(frozen=True)
class ChainState:
    Y: float
    S: float
    params: ModelParams
    step_index: int = 0


def _pargs(params: ModelParams):
    return float(params.c), float(params.n), float(params.tau), float(params.log_n)


def wait_from_exponential(e: float, s: float, params: ModelParams) -> tuple[float, bool]:
    """Strip waiting time for the exponential draw ``e`` (inverse CDF)."""
    if not 0.0 <= s < params.tau * params.n:
        raise DomainViolation(f"strip regime needs 0 <= s < tau*n, got s={s}")
    c, n, _, log_n = _pargs(params)
    t, tr = _wait_strip(float(e), float(s), c, n, log_n)
    return float(t), bool(tr)


def tail_exponent(v: float, s: float, params: ModelParams) -> float:
    """Minus the log tail of the strip waiting time at ``v < L_n(s)``."""
    g = 1.0 + s / params.n
    return params.c_n(s) * v * v / (g * g * (g + v / params.n) ** 2)


def sample_T(s: float, params: ModelParams, rng: np.random.Generator) -> tuple[float, bool]:
    """One strip waiting time and its truncation flag."""
    return wait_from_exponential(rng.exponential(), s, params)


def sample_T_extended(s: float, params: ModelParams, rng: np.random.Generator) -> float:
    """Waiting time above the strip top: min(sqrt(E/a), truncation depth)."""
    if s < params.tau * params.n:
        raise DomainViolation("extended regime needs s >= tau*n")
    c, n, tau, log_n = _pargs(params)
    return float(_wait_ext(rng.exponential(), c, n, tau, log_n)[0])


def increment(e: float, u: float, s: float, params: ModelParams) -> IncrementSample:
    """Step from exponential and uniform draws; the jump vanishes when truncated."""
    t, x, tr = _increment(float(e), float(u), float(s), *_pargs(params))
    return IncrementSample(float(t), float(x), bool(tr))


def step(state: ChainState, rng: np.random.Generator) -> ChainState:
    inc = increment(rng.exponential(), rng.uniform(-1.0, 1.0), state.S, state.params)
    return replace(state, Y=state.Y + inc.X, S=state.S + inc.T, step_index=state.step_index + 1)


def stream_key(seed: int) -> tuple[np.uint64, np.uint64]:
    return make_key(seed, DOMAIN_STREAM)


def run_chain(start, horizon: float, params: ModelParams, seed: int = 0,
              path_id: int = 0) -> PathPolyline:
    """Chain path from ``start`` until the first step past ``horizon``.

    The last vertex is moved back along its edge onto the horizon. The
    draws come from stream ``path_id`` of ``seed``.
    """
    y, s = map(float, start)
    if horizon < s:
        raise ValueError("horizon lies before the start")
    k0, k1 = stream_key(seed)
    v, _, ok = _chain_path(k0, k1, path_id, y, s, float(horizon), *_pargs(params), MAX_STEPS)
    if not ok:
        raise RuntimeError("step guard tripped")
    return PathPolyline(v)


def chain_ensemble(params: ModelParams, seed: int, starts, horizon: float) -> WebEnsemble:
    paths = [run_chain(st, horizon, params, seed, i) for i, st in enumerate(starts)]
    return WebEnsemble(paths, "chain", seed)


def chain_partial_sums(params: ModelParams, seed: int, chains: int, step_idx,
                       s0: float = 0.0) -> np.ndarray:
    """Times ``S_k`` at the sorted step indices, one row per chain."""
    idx = np.asarray(step_idx, dtype=np.int64)
    if np.any(np.diff(idx) < 0) or len(idx) == 0:
        raise ValueError("step indices must be sorted")
    k0, k1 = stream_key(seed)
    return _chain_sums(k0, k1, 0, int(chains), idx, float(s0), *_pargs(params))


def chain_values_at(params: ModelParams, seed: int, chains: int, times, start=(0.0, 0.0)):
    """Interpolated chain values at sorted strip times.

    Returns ``(values, steps, truncations)``.
    """
    t = np.asarray(times, dtype=float)
    k0, k1 = stream_key(seed)
    return _chain_values(k0, k1, 0, int(chains), float(start[0]), float(start[1]), t,
                         *_pargs(params))


def chain_first_increments(params: ModelParams, seed: int, count: int, s: float = 0.0,
                           y: float = 0.0) -> np.ndarray:
    """Columns T, X, truncated for ``count`` independent first steps from ``(y, s)``."""
    k0, k1 = stream_key(seed)
    return _chain_first(k0, k1, 0, int(count), float(y), float(s), *_pargs(params))


# geometric constructions

def strip_field(params: ModelParams, seed: int, extended: bool = False,
                cell_size: float = 1.0) -> LazyPointField:
    law = IntensityLaw("extended" if extended else "transformed", params.n, params.tau)
    return LazyPointField(seed, law, cell_size)


def _fargs(fld: LazyPointField, params: ModelParams):
    if fld.law.kind == "unit":
        raise DomainViolation("geometric strip paths need a strip law")
    return (*fld.kernel_args, float(params.c), float(params.log_n))


def geometric_step(fld: LazyPointField, params: ModelParams, y: float, s: float):
    """Next vertex of the strip path at ``(y, s)`` and whether it is a fallback."""
    x, t, f = _geo_step(*_fargs(fld, params), float(y), float(s))
    return float(x), float(t), bool(f)


def run_geometric_path(fld: LazyPointField, params: ModelParams, start,
                       horizon: float) -> PathPolyline:
    v, fb, ok = _geo_path(*_fargs(fld, params), float(start[0]), float(start[1]),
                          float(horizon), MAX_STEPS)
    if not ok:
        raise RuntimeError("step guard tripped")
    return PathPolyline(v, fallback=fb > 0)


def geometric_first_increments(params: ModelParams, seed: int, count: int, s: float = 0.0,
                               spacing: float = 0.0) -> np.ndarray:
    """First steps from ``count`` apexes at time ``s`` in one fresh strip field.

    Apexes are spaced far enough apart that their search triangles are
    disjoint, so the steps are independent. Columns T, X, fallback.
    """
    fld = strip_field(params, seed)
    _, depth = _slope_depth(s, *_pargs(params))
    spacing = spacing or 4.0 * depth + 4.0
    out = np.empty((count, 3))
    for k in range(count):
        y = k * spacing
        x, t, f = geometric_step(fld, params, y, s)
        out[k] = (t - s, x - y, f)
    return out


def run_two_paths_shared_field(fld: LazyPointField, params: ModelParams, m: float,
                               t0: float, horizon: float):
    """Paths from ``(0, t0)`` and ``(m, t0)`` in one field and their meeting time.

    Returns ``(left, right, nu)`` with ``nu = inf`` when the paths have not
    met by ``horizon``. Raises :class:`NonCrossingFault` on an order flip.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    nu, viol, _, va, vb = _pair_run(*_fargs(fld, params), 0.0, float(m), float(t0),
                                    float(horizon), MAX_STEPS, True)
    if viol:
        raise NonCrossingFault(f"{viol} order violations before meeting")
    return PathPolyline(va), PathPolyline(vb), float(nu)


def coalescence_times(params: ModelParams, seed: int, trials, m: float, t0: float,
                      horizon: float, cell_size: float = 1.0):
    """Meeting times of shared-field pairs, one derived field per trial.

    Trial ``k`` uses the field seeded by ``split(seed, k)``. Returns
    ``(nu, violations, steps)``.
    """
    tr = np.asarray(trials, dtype=np.int64)
    k0, _ = make_key(seed, 0)
    kind = EXTENDED
    return _pair_batch(k0, tr, kind, float(params.n), float(params.tau), float(cell_size),
                       float(params.c), float(params.log_n), float(m), float(t0),
                       float(horizon), MAX_STEPS)


def chase_times(params: ModelParams, seed: int, realizations, start, horizon: float,
                offsets, probe_times, cell_size: float = 1.0):
    """Reference path plus followers started to its right, per derived field.

    Returns ``(join, probe, violations, fallbacks)``: join times of each
    follower with the reference, and the reference value at ``probe_times``.
    """
    reals = np.asarray(realizations, dtype=np.int64)
    k0, _ = make_key(seed, 0)
    return _chase_batch(k0, reals, TRANSFORMED, float(params.n), float(params.tau),
                        float(cell_size), float(params.c), float(params.log_n),
                        float(start[0]), float(start[1]), float(horizon),
                        np.asarray(offsets, dtype=float), np.asarray(probe_times, dtype=float),
                        MAX_STEPS)


def touching_points(fld: LazyPointField, params: ModelParams, T: float, x_lo: float,
                    x_hi: float) -> np.ndarray:
    """Field points below time ``T`` whose next vertex lies above ``T``.

    These are the positions where the web crosses the slice at ``T``. A point
    whose whole search triangle is empty and ends below ``T`` is not
    included; its fallback vertex is ignored.
    """
    return _touching(*_fargs(fld, params), float(x_lo), float(x_hi), float(T))


@dataclass
class SliceWeb:
    """Paths from every crossing of one time slice, merged left to right."""

    T: float
    vertices: np.ndarray
    offsets: np.ndarray
    merge: np.ndarray
    parent: np.ndarray
    violations: int
    fallbacks: int

    def __len__(self) -> int:
        return len(self.merge)

    def own_path(self, i: int) -> PathPolyline:
        return PathPolyline(self.vertices[self.offsets[i]:self.offsets[i + 1]])

    def positions_at(self, t: float) -> np.ndarray:
        """Values of the paths still apart from their left neighbour at ``t``."""
        out = []
        for i in np.flatnonzero(self.merge > t):
            v = self.vertices[self.offsets[i]:self.offsets[i + 1]]
            if v[-1, 1] >= t:
                out.append(np.interp(t, v[:, 1], v[:, 0]))
        return np.array(out)

    def distinct_in(self, t: float, lo: float, hi: float, tol: float = COINCIDENCE_TOL) -> int:
        p = self.positions_at(t)
        return distinct_count(p[(p >= lo) & (p < hi)], tol)


def slice_web(fld: LazyPointField, params: ModelParams, T: float, x_lo: float, x_hi: float,
              horizon: float) -> SliceWeb:
    starts = touching_points(fld, params, T, x_lo, x_hi)
    v, off, merge, parent, viol, fb = _touch_web(*_fargs(fld, params), starts,
                                                 float(horizon), MAX_STEPS)
    return SliceWeb(float(T), v, off, merge, parent, int(viol), int(fb))


def write_trials_csv(path: str | Path, trials, m: float, t0: float, nu) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "m", "t0", "nu"])
        for k, v in zip(trials, nu):
            w.writerow([int(k), f"{m:.17g}", f"{t0:.17g}", "inf" if math.isinf(v) else f"{v:.17g}"])
