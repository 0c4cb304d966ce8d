"""Estimators and tests that turn simulated ensembles into verdicts.

Every verdict is a :class:`StatsReport` tied to a declared threshold. Tests
are two-sided at the 99% level and no multiple-test correction is applied
inside a suite.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .paths import PathPolyline

ALPHA = 0.01
COINCIDENCE_TOL = 1e-9


class InsufficientData(ValueError):
    """Too few samples (or too few expected counts) for the requested test."""


def _clean(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    return x


@dataclass
class StatsReport:
    name: str
    estimate: float | None = None
    stderr: float | None = None
    stat: float | None = None
    p: float | None = None
    threshold: str = ""
    passed: bool = False
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean({
            "name": self.name,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "stat": self.stat,
            "p": self.p,
            "threshold": self.threshold,
            "pass": bool(self.passed),
            "meta": self.meta,
        })

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        est = "nan" if self.estimate is None else f"{self.estimate:.6g}"
        return f"{verdict} {self.name}: estimate={est} threshold: {self.threshold}"


def two_sample_ks(xs, ys, name: str = "ks") -> StatsReport:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 30 or len(ys) < 30:
        raise InsufficientData("KS needs at least 30 samples per side")
    res = sps.ks_2samp(xs, ys)
    return StatsReport(name, estimate=float(res.statistic), stat=float(res.statistic),
                       p=float(res.pvalue), threshold=f"p > {ALPHA}",
                       passed=bool(res.pvalue > ALPHA),
                       meta={"n_x": len(xs), "n_y": len(ys)})


def chi_square(counts, expected, name: str = "chi2", poisson: bool = True,
               min_expected: float = 5.0) -> StatsReport:
    """Pearson chi-square of binned counts against expected counts.

    With ``poisson=True`` the counts are treated as independent Poisson
    variables (k degrees of freedom), which also tests the overall level.
    Otherwise the expected profile is rescaled to the observed total and
    k - 1 degrees of freedom are used.
    """
    counts = np.asarray(counts, dtype=float).ravel()
    expected = np.asarray(expected, dtype=float).ravel()
    if counts.shape != expected.shape:
        raise ValueError("counts and expected differ in shape")
    if np.any(expected < min_expected):
        raise InsufficientData(f"expected counts below {min_expected}")
    if poisson:
        dof = len(counts)
    else:
        expected = expected * counts.sum() / expected.sum()
        dof = len(counts) - 1
    stat = float(np.sum((counts - expected) ** 2 / expected))
    p = float(sps.chi2.sf(stat, dof))
    return StatsReport(name, estimate=float(counts.sum()), stat=stat, p=p,
                       threshold=f"p > {ALPHA}", passed=p > ALPHA,
                       meta={"dof": dof, "bins": len(counts),
                             "expected_total": float(expected.sum())})


def distinct_count(values, tol: float = COINCIDENCE_TOL) -> int:
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        return 0
    return int(1 + np.count_nonzero(np.diff(v) > tol))


def _alive(p: PathPolyline, t0: float, t1: float) -> bool:
    return p.t_start <= t0 and p.t_end >= t1


def eta_count(paths: Sequence[PathPolyline], t0: float, t: float, a: float, b: float,
              tol: float = COINCIDENCE_TOL) -> int:
    """Distinct values at t0+t among paths whose value at t0 lies in [a, b]."""
    out = []
    for p in paths:
        if not _alive(p, t0, t0 + t):
            continue
        v0 = p.value_at(t0)
        if a <= v0 <= b:
            out.append(p.value_at(t0 + t))
    return distinct_count(out, tol)


def eta_hat_count(paths: Sequence[PathPolyline], t0: float, t: float, a: float, b: float,
                  tol: float = COINCIDENCE_TOL) -> int:
    """Distinct values in (a, b) at t0+t among paths alive at t0."""
    out = []
    for p in paths:
        if not _alive(p, t0, t0 + t):
            continue
        v1 = p.value_at(t0 + t)
        if a < v1 < b:
            out.append(v1)
    return distinct_count(out, tol)


def jackknife_variance(x: np.ndarray, groups: int = 20) -> tuple[float, float]:
    """Sample variance with a delete-a-group jackknife standard error."""
    x = np.asarray(x, dtype=float)
    est = float(np.var(x, ddof=1))
    parts = np.array_split(x, groups)
    loo = np.array([np.var(np.concatenate(parts[:i] + parts[i + 1:]), ddof=1)
                    for i in range(groups)])
    se = math.sqrt((groups - 1) / groups * np.sum((loo - loo.mean()) ** 2))
    return est, se


def variance_rate(increments, dt: float, sigma2_ref: float, rel_tol: float = 0.05,
                  name: str = "variance_rate", meta: dict | None = None) -> StatsReport:
    """Variance of path increments over a time lag ``dt``, per unit time.

    Passes when the estimate is within ``rel_tol`` of ``sigma2_ref`` and the
    standardized increments are not rejected as normal by a KS test.
    """
    inc = np.asarray(increments, dtype=float)
    if len(inc) < 1000:
        raise InsufficientData("variance_rate needs at least 1000 paths")
    var, se = jackknife_variance(inc)
    est = var / dt
    z = (inc - inc.mean()) / math.sqrt(var)
    ks = sps.kstest(z, "norm")
    ok_level = abs(est - sigma2_ref) <= rel_tol * sigma2_ref
    ok_norm = ks.pvalue > ALPHA
    m = {"reference": sigma2_ref, "rel_error": (est - sigma2_ref) / sigma2_ref,
         "normality_ks": float(ks.statistic), "normality_p": float(ks.pvalue),
         "paths": len(inc), "dt": dt}
    m.update(meta or {})
    return StatsReport(name, estimate=est, stderr=se / dt, stat=float(ks.statistic),
                       p=float(ks.pvalue),
                       threshold=f"|est/ref - 1| <= {rel_tol} and normality p > {ALPHA}",
                       passed=bool(ok_level and ok_norm), meta=m)


def lln_curve(r, c_hat: float):
    r = np.asarray(r, dtype=float)
    return c_hat * r / (1.0 - c_hat * r)


def lln_deviation(s_at_grid: np.ndarray, r_grid: np.ndarray, n: float, c_hat: float,
                  tol: float = 0.05, name: str = "lln") -> StatsReport:
    """Sup over the grid of |S_{floor(rn)}/n - limit(r)|, per chain.

    ``s_at_grid`` has one row per chain and one column per grid point.
    """
    dev = np.max(np.abs(s_at_grid / n - lln_curve(r_grid, c_hat)[None, :]), axis=1)
    q95 = float(np.quantile(dev, 0.95))
    return StatsReport(name, estimate=q95, stderr=float(dev.std(ddof=1) / math.sqrt(len(dev))),
                       stat=float(dev.mean()), threshold=f"95th percentile < {tol}",
                       passed=q95 < tol,
                       meta={"chains": len(dev), "mean_sup_dev": float(dev.mean()),
                             "grid_points": len(r_grid), "r_max": float(r_grid[-1]), "n": n})


def survival_curve(nu, t_grid) -> np.ndarray:
    """Empirical P(nu > t); censored samples are +inf and count as survivors."""
    nu = np.sort(np.asarray(nu, dtype=float))
    return 1.0 - np.searchsorted(nu, np.asarray(t_grid, dtype=float), side="right") / len(nu)


def loglog_slope(t, y) -> float:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(t[keep]), np.log(y[keep]), 1)[0])


def coalescence_tail_fit(nu, t_window: tuple[float, float], target: float = -0.5,
                         tol: float = 0.1, points: int = 20, boot: int = 200,
                         seed: int = 0, name: str = "coalescence_tail") -> StatsReport:
    """Least-squares slope of log survival against log t over ``t_window``."""
    nu = np.asarray(nu, dtype=float)
    lo, hi = t_window
    if np.count_nonzero(nu > lo) == 0:
        raise InsufficientData("all samples coalesced before the window")
    grid = np.geomspace(lo, hi, points)
    surv = survival_curve(nu, grid)
    slope = loglog_slope(grid, surv)
    rng = np.random.default_rng(seed)
    bs = []
    for _ in range(boot):
        smp = nu[rng.integers(0, len(nu), len(nu))]
        bs.append(loglog_slope(grid, survival_curve(smp, grid)))
    bs = np.array(bs)
    bs = bs[np.isfinite(bs)]
    se = float(bs.std(ddof=1)) if len(bs) > 1 else float("nan")
    ci = np.quantile(bs, [0.005, 0.995]).tolist() if len(bs) else [None, None]
    return StatsReport(name, estimate=slope, stderr=se, stat=slope,
                       threshold=f"slope in [{target - tol}, {target + tol}]",
                       passed=abs(slope - target) <= tol,
                       meta={"t_window": list(t_window), "samples": len(nu),
                             "censored": int(np.count_nonzero(~np.isfinite(nu))),
                             "ci99": ci, "t_grid": grid.tolist(), "survival": surv.tolist()})


def survival_ratio(nu_small, nu_large, t: float, target: float = 2.0, rel_tol: float = 0.3,
                   name: str = "survival_ratio") -> StatsReport:
    """Ratio of survival probabilities at a fixed time for two start gaps."""
    s1 = float(survival_curve(nu_small, [t])[0])
    s2 = float(survival_curve(nu_large, [t])[0])
    n1, n2 = len(nu_small), len(nu_large)
    ratio = s2 / s1 if s1 > 0 else float("inf")
    # delta-method standard error of the ratio of two binomial proportions
    se = ratio * math.sqrt((1 - s1) / (n1 * s1) + (1 - s2) / (n2 * max(s2, 1e-300))) if s1 > 0 else None
    return StatsReport(name, estimate=ratio, stderr=se,
                       threshold=f"ratio within {target} * (1 +- {rel_tol})",
                       passed=abs(ratio - target) <= rel_tol * target,
                       meta={"t": t, "survival_small": s1, "survival_large": s2,
                             "samples_small": n1, "samples_large": n2})


def binomial_vs_oracle(hits: int, trials: int, oracle: float, k_se: float = 3.0,
                       name: str = "binomial", meta: dict | None = None) -> StatsReport:
    """Empirical frequency within ``k_se`` Monte Carlo standard errors of an oracle."""
    p_hat = hits / trials
    se = math.sqrt(max(oracle * (1 - oracle), p_hat * (1 - p_hat), 1e-12) / trials)
    z = (p_hat - oracle) / se
    m = {"hits": hits, "trials": trials, "oracle": oracle, "z": z}
    m.update(meta or {})
    return StatsReport(name, estimate=p_hat, stderr=se, stat=z,
                       p=float(2 * sps.norm.sf(abs(z))),
                       threshold=f"|z| <= {k_se}", passed=abs(z) <= k_se, meta=m)


def touch_density(lags, densities, target: float = -0.5, tol: float = 0.15,
                  name: str = "touch_density") -> StatsReport:
    """Slope of log mean touch density against log lag.

    ``densities`` holds one row per realization: distinct path positions per
    unit length at each lag. The standard error is a jackknife over rows.
    """
    d = np.asarray(densities, dtype=float)
    lags = np.asarray(lags, dtype=float)
    mean = d.mean(axis=0)
    slope = loglog_slope(lags, mean)
    se = None
    if len(d) > 2:
        loo = np.array([loglog_slope(lags, np.delete(d, i, axis=0).mean(axis=0))
                        for i in range(len(d))])
        se = float(math.sqrt((len(d) - 1) / len(d) * np.sum((loo - loo.mean()) ** 2)))
    return StatsReport(name, estimate=slope, stderr=se, stat=slope,
                       threshold=f"slope in [{target - tol}, {target + tol}]",
                       passed=abs(slope - target) <= tol,
                       meta={"lags": lags.tolist(), "density": mean.tolist(),
                             "realizations": len(d)})


def density_bound(counts, bound: float, factor: float = 1.1,
                  name: str = "density_bound", meta: dict | None = None) -> StatsReport:
    """Mean count compared with ``factor * bound``."""
    c = np.asarray(counts, dtype=float)
    est = float(c.mean())
    se = float(c.std(ddof=1) / math.sqrt(len(c))) if len(c) > 1 else None
    m = {"bound": bound, "ratio": est / bound, "samples": len(c)}
    m.update(meta or {})
    return StatsReport(name, estimate=est, stderr=se, stat=est / bound,
                       threshold=f"estimate <= {factor} * {bound:.6g}",
                       passed=est <= factor * bound, meta=m)
