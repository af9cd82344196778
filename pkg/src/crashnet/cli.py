"""Command-line entry point: ``crashnet <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import STAGES, RunConfig, dump_config, load_config
from .errors import CrashnetError, StageError

SUBCOMMAND_STAGES = {
    "detect": ("hellinger", "hht"),
    "network": ("capm", "network"),
    "metrics": ("metrics",),
    "community": ("community",),
    "gr": ("gr",),
    "run-all": None,
}


def _run_options(p):
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--config", help="key = value config file (see dump-config)")
    p.add_argument("--prices", help="price CSV: date,<ticker>,...")
    p.add_argument("--market-index", dest="market_index",
                   help="one-column index CSV, or the name of a column in the prices file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float, help="permutation-test significance level")
    p.add_argument("--window", type=int, help="Hellinger reference window in trading days")
    p.add_argument("--threads", type=int, help="worker cap; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crashnet", description="Crash-period market network analysis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMAND_STAGES:
        p = sub.add_parser(name)
        _run_options(p)
        if name == "run-all":
            p.add_argument("--stages", help=f"comma-separated subset of {','.join(STAGES)}")
    p = sub.add_parser("sweep-alpha", help="network metrics at several significance levels")
    _run_options(p)
    p.add_argument("--alphas", help="comma-separated levels (default from config)")

    p = sub.add_parser("synth", help="write a synthetic market with a planted crash")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-assets", type=int, default=50)
    p.add_argument("--n-days", type=int, default=400)
    p.add_argument("--crash-start", type=int, default=200)
    p.add_argument("--crash-length", type=int, default=40, help="0 disables the crash")
    p.add_argument("--vol-multiplier", type=float, default=5.0)
    p.add_argument("--n-sectors", type=int, default=5)
    p.add_argument("--sector-coupling", type=float, default=0.05)
    p.add_argument("--coupling-boost", type=float, default=0.7)
    p.add_argument("--post-boost", type=float, default=0.25)
    p.add_argument("--factor-vol", type=float, default=0.002)
    p.add_argument("--idio-vol", type=float, default=0.01)

    sub.add_parser("dump-config", help="print the default configuration")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    stages = None
    if getattr(args, "stages", None):
        stages = tuple(s.strip() for s in args.stages.split(",") if s.strip())
    elif SUBCOMMAND_STAGES.get(args.command):
        stages = SUBCOMMAND_STAGES[args.command]
    sweep = None
    if getattr(args, "alphas", None):
        sweep = tuple(float(a) for a in args.alphas.split(","))
    return cfg.with_overrides(
        prices=args.prices, market_index=args.market_index, out=args.out, seed=args.seed,
        alpha=args.alpha, window=args.window, threads=args.threads, stages=stages, alpha_sweep=sweep,
    )


def _synth(args) -> int:
    from .synth import CrashSpec, SynthSpec, write_synthetic

    crash = None
    if args.crash_length:
        crash = CrashSpec(args.crash_start, args.crash_length, args.vol_multiplier,
                          args.coupling_boost, args.post_boost)
    spec = SynthSpec(n_assets=args.n_assets, n_days=args.n_days, crash=crash, seed=args.seed,
                     n_sectors=args.n_sectors, sector_coupling=args.sector_coupling,
                     factor_vol=args.factor_vol, idio_vol=args.idio_vol)
    print(json.dumps(write_synthetic(spec, args.out), indent=2))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "dump-config":
        sys.stdout.write(dump_config())
        return 0
    try:
        if args.command == "synth":
            return _synth(args)
        cfg = _config_from_args(args)
        from .pipeline import alpha_sweep, run_pipeline

        if args.command == "sweep-alpha":
            alpha_sweep(cfg)
        else:
            run_pipeline(cfg, command=args.command)
    except StageError as exc:
        print(f"crashnet: {exc}", file=sys.stderr)
        return 1
    except (CrashnetError, ValueError, OSError) as exc:
        print(f"crashnet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(f"crashnet: {args.command} finished; outputs in {cfg.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
