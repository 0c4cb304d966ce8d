"""Command line: ``radweb sample-web | verify | export-plotdata``.

Exit codes: 0 all verdicts pass, 1 a statistical verdict failed, 2 usage or
configuration error, 3 internal fault (step guard, order violation).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import chain as ch
from . import radial as rd
from . import stats as st
from . import suites as su
from . import transforms as tf
from .config import ALL, SUITES, ConfigError, RunConfig, load_config
from .field import LazyPointField
from .paths import write_jsonl
from .reference import bridge_web, sample_coalescing_bm

log = logging.getLogger("radweb")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_FAULT = 0, 1, 2, 3
PLOTS = ("lln", "coaltail", "bridge")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (a manifest also works)")
    p.add_argument("--theta", type=float)
    p.add_argument("--n", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--a-exp", dest="a_exp", type=float)
    p.add_argument("--b-exp", dest="b_exp", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--realizations", type=int)
    p.add_argument("--suite-n", dest="suite_n", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--sigma2-ref", dest="sigma2_ref", type=float)
    p.add_argument("--window", type=float)
    p.add_argument("--cell-size", dest="cell_size", type=float)
    p.add_argument("--output", "-o")
    p.add_argument("--jobs", type=int, default=1, help="compiled-kernel threads")
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="radweb", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sw = sub.add_parser("sample-web", help="write path ensembles and a manifest")
    _add_common(sw)
    ve = sub.add_parser("verify", help="run verification suites")
    _add_common(ve)
    ve.add_argument("--suite", choices=SUITES + (ALL,))
    ex = sub.add_parser("export-plotdata", help="write CSV data for plotting")
    _add_common(ex)
    ex.add_argument("which")
    return ap


_CONFIG_FLAGS = ("theta", "n", "alpha", "a_exp", "b_exp", "seed", "trials", "realizations",
                 "suite_n", "horizon", "sigma2_ref", "window", "cell_size", "output", "suite")


def _resolve(args) -> RunConfig:
    over = {k: getattr(args, k, None) for k in _CONFIG_FLAGS}
    return load_config(args.config, over)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(cfg: RunConfig, outdir: Path, command: str, extra: dict) -> Path:
    files = sorted(p for p in outdir.rglob("*") if p.is_file() and p.name != "manifest.json")
    man = {
        "command": command,
        "version": __version__,
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output"},
        "derived": cfg.params().derived(),
        "files": {str(p.relative_to(outdir)): _sha256(p) for p in files},
    }
    man.update(extra)
    path = outdir / "manifest.json"
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(st._clean(man), sort_keys=True, indent=2))
        fh.write("\n")
    return path


def _pick(starts: np.ndarray, k: int) -> np.ndarray:
    """``k`` starts spread evenly over the sorted list (all when k >= len)."""
    if k >= len(starts):
        return starts
    idx = np.unique(np.linspace(0, len(starts) - 1, k).round().astype(int))
    return starts[idx]


def cmd_sample_web(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.params()
    extra: dict = {}
    if cfg.trials > 0:
        fld = LazyPointField(cfg.seed, cell_size=cfg.cell_size)
        starts = rd.starts_in_lambda(fld, p)
        chosen = _pick(starts, cfg.trials)
        gp = rd.radial_ensemble(fld, p, chosen, "gamma_prime")
        hat = rd.radial_ensemble(fld, p, chosen, "hat_gamma")
        gpp = rd.radial_ensemble(fld, p, chosen, "gamma_double_prime")
        strip = gpp.map(lambda q: tf.map_path(q, lambda v: tf.xi(v, p.n)), "strip")
        resc = strip.map(lambda q: tf.map_path(q, lambda v: tf.rescale(v, p.n)), "rescaled")
        bridge = resc.map(lambda q: tf.psi_path(q), "psi")
        for name, ens in (("gamma_prime", gp), ("hat_gamma", hat), ("gamma_double_prime", gpp),
                          ("strip", strip), ("rescaled", resc), ("psi", bridge)):
            write_jsonl(ens, out / f"{name}.jsonl")
        extra["counts"] = {"lambda_points": int(len(starts)), "paths": int(len(chosen))}
    write_manifest(cfg, out, "sample-web", extra)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    summary = {}
    for name in su.selected(cfg):
        t = time.perf_counter()
        reps = su.run_suite(name, cfg, out)
        dt = time.perf_counter() - t
        for r in reps:
            print(r.line())
        good = all(r.passed for r in reps)
        print(f"suite {name}: {'PASS' if good else 'FAIL'} ({dt:.1f} s)")
        summary[name] = good
        ok &= good
    write_manifest(cfg, out, "verify", {"suites": summary})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_export(cfg: RunConfig, which: str) -> int:
    if which not in PLOTS:
        raise UsageError(f"unknown plot data {which!r}; choose from {', '.join(PLOTS)}")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    if which == "lln":
        p = cfg.scale(1e5)
        r = su.lln_grid(p)
        S = ch.chain_partial_sums(p, su.suite_seed(cfg, "lln"), cfg.count(200),
                                  np.floor(r * p.n).astype(np.int64))
        su.write_csv(out / "lln.csv", ["r", "empirical", "limit"],
                     zip(r, (S / p.n).mean(axis=0), st.lln_curve(r, p.c_hat)))
    elif which == "coaltail":
        p = cfg.scale(1e4)
        lo, hi = su.coal_window(cfg)
        nu, viol, _ = ch.coalescence_times(p, su.suite_seed(cfg, "coaltail"),
                                           np.arange(max(cfg.trials, 1)), 1.0, 0.0, hi,
                                           cfg.cell_size)
        if viol.sum():
            raise ch.NonCrossingFault("order violation")
        t = np.geomspace(lo, hi, 20)
        s = st.survival_curve(nu, t)
        rows = [(math.log(a), math.log(b)) for a, b in zip(t, s) if b > 0]
        su.write_csv(out / "coaltail.csv", ["log_t", "log_survival"], rows)
    else:
        p = cfg.params()
        rng = np.random.default_rng(cfg.seed)
        starts = [(y, 0.0) for y in np.linspace(-1.0, 1.0, 21)]
        ref = sample_coalescing_bm(starts, p.sigma2, 1e-3, p.tau, rng, cfg.seed)
        web = bridge_web(ref)
        rows = [(i, u, x) for i, q in enumerate(web.paths) for x, u in q.vertices]
        su.write_csv(out / "bridge.csv", ["path", "u", "x"], rows)
    write_manifest(cfg, out, f"export-plotdata {which}", {})
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = _resolve(args)
        if args.jobs < 1:
            raise UsageError("--jobs must be positive")
        import numba
        numba.set_num_threads(min(args.jobs, numba.config.NUMBA_NUM_THREADS))
        if args.command == "sample-web":
            return cmd_sample_web(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_export(cfg, args.which)
    except (UsageError, ConfigError) as exc:
        print(f"radweb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ch.NonCrossingFault, rd.NonTermination, RuntimeError) as exc:
        print(f"radweb: internal fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    except st.InsufficientData as exc:
        print(f"radweb: insufficient data: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
