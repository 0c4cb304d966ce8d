"""Verification suites, one per acceptance criterion.

Each suite takes a :class:`RunConfig`, writes its CSV curves into a
directory and returns its reports. Suite randomness is keyed on the config
seed and the suite name only, so reruns reproduce outputs byte for byte.

Default scales (overridden by ``suite_n``):

=================  ==============================================
intensity          n = 1e4
increment          n = 1e4
lln                n = 1e5
variance           n = 1e5
coaltail           n = 1e4
b1                 n = 1e5
e-density          n = 1e5 (density bound), n = 1e4 (touch slope)
lemma-agreement    n = 1e4
hausdorff          n in {1e3, 1e4, 1e5}
=================  ==============================================
"""
from __future__ import annotations

import csv
import json
import logging
import math
import zlib
from pathlib import Path
from typing import Callable

import numpy as np

from . import chain as ch
from . import radial as rd
from . import stats as st
from . import transforms as tf
from .config import SUITES, RunConfig
from .field import IntensityLaw, LazyPointField, chi_square_intensity_test
from .reference import analytic_oracles
from .rng import trial_seed

log = logging.getLogger(__name__)


def suite_seed(cfg: RunConfig, name: str, index: int = 0) -> int:
    """Seed of stream ``index`` of a suite, split from the config seed."""
    return trial_seed(cfg.seed, (zlib.crc32(name.encode()) << 16) + index)


def write_csv(path: Path, header: list[str], rows) -> None:
    def fmt(v):
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, str):
            return v
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


# ---------------------------------------------------------------- suites

def suite_intensity(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    p = cfg.scale(1e4)
    fld = LazyPointField(suite_seed(cfg, "intensity"), cell_size=cfg.cell_size)
    half = 5.0
    pts = fld.points_in(rd.Sector(p, half / p.n), cache=False)
    strip = tf.xi(pts, p.n)
    if len(strip) < 5000:
        raise st.InsufficientData(f"only {len(strip)} points in the angular strip")
    law = IntensityLaw("transformed", p.n, p.tau)
    rep = chi_square_intensity_test(strip, law, (-half, half), (0.0, p.tau * p.n), bins=20,
                                       name="transformed_intensity")
    edges = np.linspace(0.0, p.tau * p.n, 21)
    obs, _ = np.histogram(strip[:, 1], bins=edges)
    write_csv(out / "intensity.csv", ["s_lo", "s_hi", "observed", "expected"],
              [(edges[k], edges[k + 1], obs[k], 2 * half * law.mass(edges[k], edges[k + 1]))
               for k in range(20)])
    return [rep]


def suite_increment(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    p = cfg.scale(1e4)
    count = max(cfg.trials, 30)
    a = ch.chain_first_increments(p, suite_seed(cfg, "increment", 0), count)
    b = ch.geometric_first_increments(p, suite_seed(cfg, "increment", 1), count)
    reps = [st.two_sample_ks(a[:, 0], b[:, 0], "first_step_T"),
            st.two_sample_ks(a[:, 1], b[:, 1], "first_step_X"),
            st.two_sample_ks(a[:, 0] + np.abs(a[:, 1]), b[:, 0] + np.abs(b[:, 1]),
                             "first_step_T_plus_abs_X")]
    for r in reps:
        r.meta.update({"n": p.n, "start_time": 0.0, "fallbacks": int(b[:, 2].sum()),
                       "truncated": int(a[:, 2].sum())})
    write_csv(out / "increments.csv", ["source", "T", "X"],
              [("chain", t, x) for t, x, _ in a] + [("field", t, x) for t, x, _ in b])
    return reps


def lln_grid(p) -> np.ndarray:
    return np.linspace(0.0, 0.5 / p.c_hat, 50)


def suite_lln(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    p = cfg.scale(1e5)
    r = lln_grid(p)
    idx = np.floor(r * p.n).astype(np.int64)
    S = ch.chain_partial_sums(p, suite_seed(cfg, "lln"), cfg.count(200), idx)
    rep = st.lln_deviation(S, r, p.n, p.c_hat)
    limit = st.lln_curve(r, p.c_hat)
    dev = np.quantile(np.abs(S / p.n - limit[None, :]), 0.95, axis=0)
    rep.meta["curve_check_r0.3"] = analytic_oracles("lln", r=0.3, c_hat=p.c_hat)
    write_csv(out / "lln.csv", ["r", "dev"], zip(r, dev))
    write_csv(out / "lln_curve.csv", ["r", "empirical", "limit"],
              zip(r, (S / p.n).mean(axis=0), limit))
    return [rep]


def suite_variance(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    p = cfg.scale(1e5)
    fr = np.array([0.2, 0.5, 0.8]) * p.tau
    vals, steps, trunc = ch.chain_values_at(p, suite_seed(cfg, "variance"), max(cfg.trials, 1000),
                                            fr * p.n)
    z = vals / math.sqrt(p.n)
    ref = cfg.sigma2_ref if cfg.sigma2_ref is not None else p.sigma2
    meta = {"sigma2_derived": p.sigma2, "omega_printed": p.omega_printed,
            "omega_printed_sq": p.omega_printed ** 2, "c_over_6_c_hat": p.c / (6 * p.c_hat),
            "n": p.n, "t1": fr[0], "t2": fr[2], "mean_steps": float(steps.mean()),
            "truncated_steps": int(trunc.sum())}
    rep = st.variance_rate(z[:, 2] - z[:, 0], fr[2] - fr[0], ref, meta=meta)
    d1 = z[:, 1] - z[:, 0]
    d2 = z[:, 2] - z[:, 1]
    corr = float(np.corrcoef(d1, d2)[0, 1])
    se = 1.0 / math.sqrt(len(d1))
    crep = st.StatsReport("disjoint_increment_correlation", estimate=corr, stderr=se,
                          stat=corr / se, threshold="|corr| <= 3 standard errors",
                          passed=abs(corr) <= 3 * se, meta={"paths": len(d1)})
    drift = float((z[:, 2] - z[:, 0]).mean())
    dse = float((z[:, 2] - z[:, 0]).std(ddof=1) / math.sqrt(len(z)))
    mrep = st.StatsReport("martingale_drift", estimate=drift, stderr=dse, stat=drift / dse,
                          threshold="|mean| <= 3 standard errors", passed=abs(drift) <= 3 * dse,
                          meta={"paths": len(z)})
    write_csv(out / "variance.csv", ["t1", "t2", "variance_rate", "reference",
                                     "sigma2_derived", "omega_printed", "omega_printed_sq"],
              [(fr[0], fr[2], rep.estimate, ref, p.sigma2, p.omega_printed,
                p.omega_printed ** 2)])
    return [rep, crep, mrep]


def coal_window(cfg: RunConfig) -> tuple[float, float]:
    hi = cfg.horizon if cfg.horizon is not None else 1e4
    return hi / 100.0, hi


def suite_coaltail(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    p = cfg.scale(1e4)
    lo, hi = coal_window(cfg)
    t0 = 0.0
    trials = np.arange(max(cfg.trials, 1), dtype=np.int64)
    seed = suite_seed(cfg, "coaltail")
    nus = {}
    rows = []
    for m in (1.0, 2.0, 4.0):
        nu, viol, _ = ch.coalescence_times(p, seed, trials, m, t0, t0 + hi, cfg.cell_size)
        if viol.sum():
            raise ch.NonCrossingFault(f"{int(viol.sum())} order violations at m={m}")
        nus[m] = nu
        rows += [(int(k), m, t0, v) for k, v in zip(trials, nu)]
    write_csv(out / "trials.csv", ["trial", "m", "t0", "nu"], rows)
    fit = st.coalescence_tail_fit(nus[1.0], (lo, hi))
    t_mid = math.sqrt(lo * hi)
    ratio = st.survival_ratio(nus[1.0], nus[2.0], t_mid)
    s1 = float(st.survival_curve(nus[1.0], [t_mid])[0])
    s4 = float(st.survival_curve(nus[4.0], [t_mid])[0])
    ratio.meta["ratio_m4_m1"] = s4 / s1 if s1 > 0 else None
    for r in (fit, ratio):
        r.meta.update({"n": p.n, "t0": t0, "trials": len(trials)})
    grid = np.array(fit.meta["t_grid"])
    write_csv(out / "survival.csv", ["t", "survival"], zip(grid, fit.meta["survival"]))
    return [fit, ratio]


def suite_b1(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    p = cfg.scale(1e5)
    sq = math.sqrt(p.n)
    t0 = 0.25 * p.tau
    span = 0.5 * p.tau
    eps = (0.1, 0.2)
    lags = (0.25 * p.tau, 0.5 * p.tau)
    R = cfg.count(2000)
    join, probe, viol, fb = ch.chase_times(p, suite_seed(cfg, "b1"), np.arange(R),
                                           (0.0, t0 * p.n), (t0 + span) * p.n,
                                           [e * sq for e in eps],
                                           [t0 * p.n, (t0 + span) * p.n], cfg.cell_size)
    if viol.sum():
        raise ch.NonCrossingFault(f"{int(viol.sum())} order violations")
    disp = (probe[:, 1] - probe[:, 0]) / sq
    s2, s2_se = st.jackknife_variance(disp)
    s2, s2_se = s2 / span, s2_se / span
    reps = []
    rows = []
    for b, e in enumerate(eps):
        for t in lags:
            hits = int(np.count_nonzero(join[:, b] > (t0 + t) * p.n))
            oracle = analytic_oracles("noncoalescence", eps=e, t=t, sigma2=s2)
            reps.append(st.binomial_vs_oracle(hits, R, oracle, name=f"b1_eps{e}_t{t}", meta={
                "eps": e, "t": t, "t0": t0, "n": p.n, "sigma2_fitted": s2,
                "sigma2_fitted_se": s2_se, "sigma2_derived": p.sigma2,
                "fallbacks": int(fb.sum())}))
            rows.append((e, t, hits, R, oracle))
    write_csv(out / "b1.csv", ["eps", "t", "hits", "trials", "oracle"], rows)
    return reps


def touch_lags() -> np.ndarray:
    return np.geomspace(1.0, 100.0, 12)


def suite_e_density(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    reps = []
    # density of distinct points against the coalescing-motion bound
    p = cfg.scale(1e5)
    sq = math.sqrt(p.n)
    T = 0.25 * p.tau * p.n
    lags = (0.25 * p.tau, 0.5 * p.tau)
    windows = 4
    W = cfg.window if cfg.window is not None else 10.0 * math.sqrt(p.sigma2 * max(lags))
    R = cfg.count(100)
    counts = np.zeros((R, len(lags)))
    viol = 0
    for k in range(R):
        fld = ch.strip_field(p, suite_seed(cfg, "e-density", k), cell_size=cfg.cell_size)
        web = ch.slice_web(fld, p, T, -W * sq, (windows + W) * sq, T + max(lags) * p.n)
        viol += web.violations
        for j, t in enumerate(lags):
            c = [web.distinct_in(T + t * p.n, a * sq, (a + 1) * sq) for a in range(windows)]
            counts[k, j] = np.mean(c)
    if viol:
        raise ch.NonCrossingFault(f"{viol} order violations in the slice web")
    rows = []
    for j, t in enumerate(lags):
        bound = analytic_oracles("density", t=t, sigma2=p.sigma2)
        reps.append(st.density_bound(counts[:, j], bound, 1.1, name=f"eta_hat_t{t}", meta={
            "t": t, "t0": T / p.n, "n": p.n, "window_width": 1.0, "margin": W,
            "windows_per_realization": windows}))
        rows.append((t, counts[:, j].mean(), bound))
    write_csv(out / "eta_hat.csv", ["t", "mean_count", "bound"], rows)
    # touch density slope in strip units
    p = cfg.scale(1e4)
    T = 0.25 * p.tau * p.n
    lg = touch_lags()
    M = 2000.0
    W = 10.0 * math.sqrt(p.sigma2 * lg[-1])
    R = cfg.count(20)
    dens = np.zeros((R, len(lg)))
    for k in range(R):
        fld = ch.strip_field(p, suite_seed(cfg, "touch", k), cell_size=cfg.cell_size)
        web = ch.slice_web(fld, p, T, -W, M + W, T + lg[-1])
        viol += web.violations
        dens[k] = [web.distinct_in(T + t, 0.0, M) / M for t in lg]
    if viol:
        raise ch.NonCrossingFault(f"{viol} order violations in the slice web")
    rep = st.touch_density(lg, dens)
    rep.meta.update({"n": p.n, "T": T, "M": M})
    reps.append(rep)
    write_csv(out / "touch_density.csv", ["t", "density"], zip(lg, dens.mean(axis=0)))
    return reps


def suite_lemma_agreement(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    p = cfg.scale(1e4)
    rows = []
    for k in range(cfg.count(10)):
        seed = suite_seed(cfg, "lemma-agreement", k)
        res = rd.agreement_counts(LazyPointField(seed, cell_size=cfg.cell_size), p)
        rows.append((seed, res["starts"], res["agree"], res["fallback_paths"], res["side_exits"],
                     res["max_lateral"]))
    write_csv(out / "agreement.csv",
              ["seed", "starts", "agree", "fallback_paths", "side_exits", "max_lateral"], rows)
    starts = sum(r[1] for r in rows)
    agree = sum(r[2] for r in rows)
    frac = agree / starts if starts else float("nan")
    per = [r[2] / r[1] for r in rows if r[1]]
    return [st.StatsReport("variant_agreement", estimate=frac, stat=frac,
                           threshold="fraction >= 0.999", passed=bool(starts and frac >= 0.999),
                           meta={"n": p.n, "seeds": len(rows), "starts": starts,
                                 "agree": agree, "min_seed_fraction": min(per) if per else None,
                                 "fallback_paths": sum(r[3] for r in rows),
                                 "side_exits": sum(r[4] for r in rows)}),
            lateral_report([r[5] for r in rows], p)]


def lateral_report(max_lateral, p) -> st.StatsReport:
    """Share of realizations with a variant path straying more than n^(1-a) sideways."""
    bound = p.n ** (1.0 - p.a_exp)
    over = sum(v > bound for v in max_lateral)
    frac = over / len(max_lateral) if max_lateral else float("nan")
    return st.StatsReport("lateral_excursion", estimate=frac, stat=max(max_lateral, default=0.0),
                          threshold="share of seeds over n^(1-a) < 0.01",
                          passed=bool(max_lateral) and frac < 0.01,
                          meta={"n": p.n, "bound": bound, "seeds": len(max_lateral),
                                "exceeding": over})


def hausdorff_ladder(cfg: RunConfig) -> tuple[float, ...]:
    if cfg.suite_n is not None:
        return (cfg.suite_n / 4.0, cfg.suite_n / 2.0, cfg.suite_n)
    return (1e3, 1e4, 1e5)


def suite_hausdorff(cfg: RunConfig, out: Path) -> list[st.StatsReport]:
    rows = []
    seed = suite_seed(cfg, "hausdorff")
    for n in hausdorff_ladder(cfg):
        p = cfg.params(n)
        fld = LazyPointField(seed, cell_size=cfg.cell_size)
        starts = rd.stratified_starts(fld, p, cfg.count(16))
        ens = rd.radial_ensemble(fld, p, starts, "gamma_double_prime")
        e1 = tf.radial_paths_to_rescaled(ens, n)
        e2 = tf.radial_paths_to_bridge(ens, n)
        dh = tf.hausdorff_distance(e1, e2, tf.default_window(p))
        v = np.vstack([q.vertices for q in ens.paths])
        r = np.hypot(v[:, 0], v[:, 1])
        sig = np.arctan2(v[:, 1], v[:, 0]) + 0.5 * math.pi
        gap_x = float(np.max(np.abs(r * sig - r * np.sin(sig)))) / math.sqrt(n)
        gap_t = float(np.max(r * (1.0 - np.cos(sig)))) / n
        rows.append((n, dh, gap_x, gap_t, n ** (0.5 - 3 * p.a_exp), n ** (-2 * p.a_exp),
                     len(starts)))
    write_csv(out / "hausdorff.csv", ["n", "d_h", "gap_space", "gap_time", "rate_space",
                                      "rate_time", "paths"], rows)
    dh = [r[1] for r in rows]
    mono = all(b < a for a, b in zip(dh, dh[1:]))
    reps = [st.StatsReport("hausdorff_decreasing", estimate=dh[-1], stat=dh[-1],
                           threshold="d_H strictly decreasing in n", passed=mono,
                           meta={"n": [r[0] for r in rows], "d_h": dh})]
    for name, gi, ri in (("gap_rate_space", 2, 4), ("gap_rate_time", 3, 5)):
        const = rows[0][gi] / rows[0][ri]
        ratios = [r[gi] / (const * r[ri]) if const > 0 else 0.0 for r in rows]
        reps.append(st.StatsReport(name, estimate=max(ratios), stat=max(ratios),
                                   threshold="gap <= 3 * C * rate, C fitted at the smallest n",
                                   passed=max(ratios) <= 3.0,
                                   meta={"constant": const, "ratios": ratios,
                                         "gaps": [r[gi] for r in rows]}))
    return reps


SUITE_FUNCS: dict[str, Callable[[RunConfig, Path], list[st.StatsReport]]] = {
    "intensity": suite_intensity,
    "increment": suite_increment,
    "lln": suite_lln,
    "variance": suite_variance,
    "coaltail": suite_coaltail,
    "b1": suite_b1,
    "e-density": suite_e_density,
    "lemma-agreement": suite_lemma_agreement,
    "hausdorff": suite_hausdorff,
}
assert set(SUITE_FUNCS) == set(SUITES)


def run_suite(name: str, cfg: RunConfig, outdir: Path) -> list[st.StatsReport]:
    """Run one suite and write ``report.json`` plus its CSVs under ``outdir/name``."""
    d = Path(outdir) / name
    d.mkdir(parents=True, exist_ok=True)
    log.info("suite %s", name)
    try:
        reps = SUITE_FUNCS[name](cfg, d)
    except st.InsufficientData as exc:
        reps = [st.StatsReport(name, threshold="enough data for the test", passed=False,
                               meta={"error": str(exc)})]
    with open(d / "report.json", "w", newline="\n") as fh:
        fh.write(json.dumps([r.to_dict() for r in reps], sort_keys=True, indent=2))
        fh.write("\n")
    return reps


def selected(cfg: RunConfig) -> tuple[str, ...]:
    return SUITES if cfg.suite == "all" else (cfg.suite,)
