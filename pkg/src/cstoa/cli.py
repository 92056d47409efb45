"""Command-line interface.

    cstoa simulate      [--config F] [--set k=v ...] [--phi PHI.bin] --out table.csv
    cstoa sweep --axis {snr,k,u,delta} --grid 0,5,10 ... --out table.csv
    cstoa channel-stats [--realizations 1000] [--energy-fraction 0.8] --out stats.csv
    cstoa dump-phi      --out phi.bin
    cstoa load-phi      phi.bin [--verify]
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys

import numpy as np

from . import __version__
from . import config as _cfg
from .acquisition import dump_phi, load_phi
from .channel import ChannelParams, apriori_stats
from .errors import CstoaError
from .harness import AXES, ExperimentConfig, build_phi, run_sweep

FULL_SCALE_TRIALS = 1000

log = logging.getLogger("cstoa")


def _common(p: argparse.ArgumentParser, trials: bool = True) -> None:
    p.add_argument("--config", help="flat key=value experiment/channel config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key (repeatable)")
    p.add_argument("--seed", type=int, help="master seed")
    if trials:
        p.add_argument("--trials", type=int, help="Monte-Carlo trials per grid point")
        p.add_argument("--full-scale", "--paper-scale", dest="full_scale", action="store_true",
                       help=f"use {FULL_SCALE_TRIALS} trials per point instead of the default 200")


def _run_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    p.add_argument("--record-runtime", action="store_true",
                   help="fill the runtime_ms CSV column (makes the CSV run-dependent)")
    p.add_argument("--phi", help="use a measurement matrix from a dump-phi file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cstoa", description="Compressive-sampling UWB TOA simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one operating point")
    _common(p)
    _run_opts(p)

    p = sub.add_parser("sweep", help="sweep one parameter")
    _common(p)
    _run_opts(p)
    p.add_argument("--axis", choices=AXES, required=True)
    p.add_argument("--grid", required=True,
                   help="comma-separated axis values (snr in dB, k, u=N/M, delta in samples)")

    p = sub.add_parser("channel-stats", help="first-path statistics of the channel model")
    _common(p, trials=False)
    p.add_argument("--realizations", type=int, default=1000)
    p.add_argument("--energy-fraction", type=float, default=0.8)
    p.add_argument("--bin-scale", type=float, default=1.0, help="histogram bin width in samples")
    p.add_argument("--out", help="CSV output path (default: stdout)")

    p = sub.add_parser("dump-phi", help="write the configured measurement matrix")
    _common(p, trials=False)
    p.add_argument("--out", required=True)

    p = sub.add_parser("load-phi", help="inspect a measurement-matrix dump")
    _common(p, trials=False)
    p.add_argument("path")
    p.add_argument("--verify", action="store_true",
                   help="regenerate Phi from the configuration and compare bit for bit")
    return parser


def _experiment(args) -> ExperimentConfig:
    overrides = _cfg.parse_overrides(args.overrides)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    cfg = ExperimentConfig.from_file(args.config, overrides)
    if getattr(args, "full_scale", False):
        cfg = dataclasses.replace(cfg, n_trials=FULL_SCALE_TRIALS)
    if getattr(args, "trials", None) is not None:
        cfg = dataclasses.replace(cfg, n_trials=args.trials)
    return cfg


def _emit(table, args) -> None:
    if args.out:
        table.write(args.out, record_runtime=args.record_runtime)
        log.info("wrote %s (+ .meta.json)", args.out)
    else:
        table.to_csv(sys.stdout, record_runtime=args.record_runtime)


def _parse_grid(text: str, axis: str) -> list:
    cast = _cfg.to_float if axis == "snr" else _cfg.to_int
    values = [cast(v) for v in text.split(",") if v.strip()]
    if not values:
        raise CstoaError("empty --grid")
    return values


def cmd_simulate(args) -> None:
    cfg = _experiment(args)
    phi = load_phi(args.phi) if args.phi else None
    _emit(run_sweep(cfg, "snr", [cfg.snr_db], jobs=args.jobs, phi=phi), args)


def cmd_sweep(args) -> None:
    cfg = _experiment(args)
    phi = load_phi(args.phi) if args.phi else None
    _emit(run_sweep(cfg, args.axis, _parse_grid(args.grid, args.axis), jobs=args.jobs, phi=phi), args)


def cmd_channel_stats(args) -> None:
    values = _cfg.read_flat(args.config) if args.config else {}
    values.update(_cfg.parse_overrides(args.overrides))
    if args.seed is not None:
        values["rng_seed"] = str(args.seed)
    params = ChannelParams.from_mapping(values, base=ChannelParams.cm1())
    rate = _cfg.to_float(values.get("sampling_rate_ghz", 8)) * 1e9
    stats = apriori_stats(params, args.realizations, args.energy_fraction, rate, bin_scale=args.bin_scale)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("statistic", "bin_lo", "bin_hi", "value"))
        for lam, p in sorted(stats.lambda_pmf.items()):
            w.writerow(("lambda_pmf", lam, lam, repr(p)))
        edges = stats.pld_edges
        for lo, hi, d in zip(edges[:-1], edges[1:], stats.pld_density):
            w.writerow(("pld_density_per_ns", repr(float(lo)), repr(float(hi)), repr(float(d))))
    finally:
        if args.out:
            fh.close()


def cmd_dump_phi(args) -> None:
    cfg = _experiment(args)
    phi = build_phi(cfg)
    dump_phi(phi, args.out)
    log.info("wrote %dx%d measurement matrix (seed %s) to %s", phi.M, phi.N, phi.seed, args.out)


def cmd_load_phi(args) -> int:
    phi = load_phi(args.path)
    a = phi.entries
    print(f"M={phi.M} N={phi.N} U={phi.undersampling:g} seed={phi.seed}")
    print(f"mean={a.mean():.6g} var={a.var():.6g}")
    if args.verify:
        overrides = _cfg.parse_overrides(args.overrides)
        if args.seed is not None:
            overrides["seed"] = str(args.seed)
        elif phi.seed is not None and "seed" not in overrides:
            overrides["seed"] = str(phi.seed)
        cfg = ExperimentConfig.from_file(args.config, overrides)
        cfg = dataclasses.replace(cfg, undersampling=phi.N // phi.M)
        ref = build_phi(cfg)
        same = ref.entries.shape == a.shape and np.array_equal(ref.entries, a)
        print("verify: match" if same else "verify: MISMATCH")
        return 0 if same else 3
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "channel-stats": cmd_channel_stats,
    "dump-phi": cmd_dump_phi,
    "load-phi": cmd_load_phi,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args) or 0
    except (CstoaError, OSError) as exc:
        print(f"cstoa: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
