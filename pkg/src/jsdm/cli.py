"""Command-line front end.

Every subcommand reads a scenario config (YAML; angles in degrees) and
writes a CSV, so runs are scriptable and reproducible.  Exit codes: 0 on
success, 2 for invalid configs or infeasible geometry, 3 when a solver
fails to converge; ``validate`` returns 1 if any invariant fails.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import ConfigError, ConvergenceError, FeasibilityError
from .harness import (Scenario, feasible_width_cap, parse_scenario,
                      run_scenario, slope_analysis, sweep_bprime)
from .prebeamforming import bd_leakage, tall_unitary_check
from .spectrum import dft_index_set, eigenvalue_cdf, spectral_density_for, \
    wrap_frequency


def _write_rows(out: Path, header, rows):
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _fmt(v) -> str:
    return repr(float(v))


def _load(args) -> Scenario:
    if not args.config:
        raise ConfigError("this command needs --config")
    return parse_scenario(Path(args.config))


def _out_path(args, default: str) -> Path:
    return Path(args.out) if args.out else Path(default)


def cmd_covariance(args) -> int:
    sc = _load(args)
    specs = sc.covariance_specs()
    out = _out_path(args, "covariance.csv")
    if out.suffix == ".npz":
        arrays = {}
        for g, spec in enumerate(specs):
            arrays[f"R{g}"] = spec.R
            arrays[f"lam{g}"] = spec.lam
        out.parent.mkdir(parents=True, exist_ok=True)
        np.savez(out, **arrays)
        print(out)
        return 0
    rows = []
    for g, spec in enumerate(specs):
        for i, lam in enumerate(spec.lam):
            rows.append((g, "eigenvalue", i, _fmt(lam)))
        rows.append((g, "trace", "", _fmt(np.trace(spec.R).real)))
        rows.append((g, "rank", "", _fmt(spec.rank)))
        rows.append((g, "gain", "", _fmt(spec.gain)))
        if spec.r_star is not None:
            rows.append((g, "r_star", "", _fmt(spec.r_star)))
    _write_rows(out, ("group", "metric", "index", "value"), rows)
    print(out)
    return 0


def cmd_spectrum(args) -> int:
    sc = _load(args)
    geo = sc.data["geometry"]
    if geo["kind"] != "ula":
        raise ConfigError("spectral analysis applies to ula geometries")
    M, D = geo["m"], geo["spacing"]
    rows = []
    for g, prof in enumerate(sc.profiles()):
        sd = spectral_density_for(prof, D)
        freqs = wrap_frequency(np.arange(M), M)
        for m, (xi, s) in enumerate(zip(freqs, prof.gain * sd.samples(M))):
            rows.append((g, "density", m, _fmt(s)))
        for source in ("exact", "sampledS"):
            for i, lam in enumerate(eigenvalue_cdf(source, M, D, prof)):
                rows.append((g, f"eig_{source}", i, _fmt(lam)))
        rows.append((g, "dft_support_size", "",
                     _fmt(len(dft_index_set(sd, M)))))
    out = _out_path(args, "spectrum.csv")
    _write_rows(out, ("group", "metric", "index", "value"), rows)
    print(out)
    return 0


def cmd_prebeam(args) -> int:
    sc = _load(args)
    specs = sc.covariance_specs()
    pb = sc.prebeamformer(specs)
    leak = bd_leakage(pb, specs)
    rows = []
    for g, b in enumerate(pb.b):
        rows.append((g, "width", "", _fmt(b)))
    for g in range(pb.groups):
        for gp in range(pb.groups):
            rows.append((g, "leakage_share", gp, _fmt(leak[g, gp])))
    resid = max(tall_unitary_check(Bg)[1] for Bg in pb.blocks)
    rows.append(("all", "block_orthonormal_residual", "", _fmt(resid)))
    out = _out_path(args, "prebeam.csv")
    _write_rows(out, ("group", "metric", "index", "value"), rows)
    print(out)
    return 0


def cmd_deteq(args) -> int:
    sc = _load(args)
    path = run_scenario(sc, out=args.out, seed=args.seed, mc_draws=0,
                        threads=args.threads)
    print(path)
    return 0


def cmd_montecarlo(args) -> int:
    sc = _load(args)
    draws = args.mc_draws if args.mc_draws is not None else sc.mc_draws
    if draws <= 0:
        raise ConfigError("montecarlo needs mc_draws > 0 (flag or config)")
    path = run_scenario(sc, out=args.out, seed=args.seed, mc_draws=draws,
                        threads=args.threads)
    print(path)
    return 0


def cmd_sweep(args) -> int:
    sc = _load(args)
    out = _out_path(args, "sweep.csv")
    if args.mode == "slope":
        res = slope_analysis(sc, b_max=args.b_max)
        rows = [( _fmt(p.snr_db), p.S_prime, p.b_prime, _fmt(p.slope),
                  _fmt(p.net_se)) for p in res.points]
        _write_rows(out, ("snr_db", "s_prime", "b_prime", "slope", "net_se"),
                    rows)
        print(out)
        return 0
    s_prime = args.s_prime
    smax = max(s_prime) if s_prime else max(sc.streams)
    lo = args.b_min if args.b_min else (smax + 1 if sc.scheme == "zf"
                                        else smax)
    hi = args.b_max if args.b_max else feasible_width_cap(sc)
    if hi < lo:
        raise ConfigError(f"empty training-length range [{lo}, {hi}]")
    sweep = sweep_bprime(sc, range(lo, hi + 1),
                         S_prime=s_prime if s_prime else None)
    best = {snr: sweep.best(snr).b_prime for snr in sc.snr_grid_db}
    rows = [(_fmt(p.snr_db), p.b_prime, _fmt(p.penalty), _fmt(p.se),
             _fmt(p.net_se), int(best[p.snr_db] == p.b_prime))
            for p in sweep.points]
    _write_rows(out, ("snr_db", "b_prime", "penalty", "se", "net_se",
                      "is_argmax"), rows)
    print(out)
    return 0


def cmd_layout3d(args) -> int:
    from .layout3d import evaluate_sector
    import yaml
    p, schemes, method = 2e5, ("rzf", "zf"), "approx_bd"
    if args.config:
        raw = yaml.safe_load(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ConfigError("layout3d config must be a mapping")
        extra = set(raw) - {"p", "schemes", "method"}
        if extra:
            raise ConfigError(f"unknown layout3d keys: {sorted(extra)}")
        p = float(raw.get("p", p))
        schemes = tuple(raw.get("schemes", schemes))
        method = raw.get("method", method)
    rows = []
    for scheme in schemes:
        sector = evaluate_sector(p, scheme=scheme, method=method)
        for q, rate in enumerate(sector.pattern_rates):
            rows.append((method, scheme, "", q, "pattern_sum_rate",
                         _fmt(rate)))
        for rep in (sector.pfs, sector.maxmin):
            for q, nu in enumerate(rep.nu):
                rows.append((method, scheme, rep.criterion, q, "nu",
                             _fmt(nu)))
            rows.append((method, scheme, rep.criterion, "all",
                         "weighted_sum_rate", _fmt(rep.total)))
    out = _out_path(args, "layout3d.csv")
    _write_rows(out, ("method", "scheme", "criterion", "pattern", "metric",
                      "value"), rows)
    print(out)
    return 0


def cmd_validate(args) -> int:
    from .validate import run_all
    results = run_all(seed=args.seed if args.seed is not None else 0)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jsdm",
        description="Two-stage spatial multiplexing: scenario evaluation, "
                    "design sweeps and invariant checks.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML file")
    common.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    common.add_argument("--out", help="output file path")
    common.add_argument("--threads", type=int, default=1,
                        help="workers across grid points (default 1)")
    common.add_argument("--mc-draws", type=int, default=None,
                        help="override the Monte Carlo draw count")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("covariance", parents=[common],
                   help="per-group covariance eigenvalues (csv or npz)"
                   ).set_defaults(fn=cmd_covariance)
    sub.add_parser("spectrum", parents=[common],
                   help="ULA spectral density and eigenvalue CDFs"
                   ).set_defaults(fn=cmd_spectrum)
    sub.add_parser("prebeam", parents=[common],
                   help="pre-beamformer widths and leakage report"
                   ).set_defaults(fn=cmd_prebeam)
    sub.add_parser("deteq", parents=[common],
                   help="deterministic equivalents over the SNR grid"
                   ).set_defaults(fn=cmd_deteq)
    sub.add_parser("montecarlo", parents=[common],
                   help="deterministic equivalents next to Monte Carlo"
                   ).set_defaults(fn=cmd_montecarlo)
    sw = sub.add_parser("sweep", parents=[common],
                        help="training-length sweep or slope analysis")
    sw.add_argument("--mode", choices=("bprime", "slope"), default="bprime")
    sw.add_argument("--b-min", type=int, default=None)
    sw.add_argument("--b-max", type=int, default=None)
    sw.add_argument("--s-prime", type=int, nargs="*", default=None,
                    help="per-group stream count(s) for the sweep")
    sw.set_defaults(fn=cmd_sweep)
    sub.add_parser("layout3d", parents=[common],
                   help="multi-ring sector pipeline with fairness schedules"
                   ).set_defaults(fn=cmd_layout3d)
    sub.add_parser("validate", parents=[common],
                   help="run the cross-module invariant suites"
                   ).set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FeasibilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
