"""Command-line interface.

Subcommands:
  analytic   evaluate a scaling law:  rsobf analytic --law eq3 --k 256 --rho-b 1.0
  simulate   Monte-Carlo a config:    rsobf simulate --config sys.yaml --slots 100000 --seed 7 --out rate.csv
  figure     reproduce figure data:   rsobf figure fig2b --out results/ --slots 100000

Exit codes: 0 success, 1 usage error, 2 runtime/numeric error.
RSOBF_SEED overrides the default seed when --seed is not given.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

from . import scheduler
from .analytics import LAW_IDS, ScalingLawSpec, scaling_law
from .figures import FIGURES, FigureJob, run_figure
from .scenario import load_scenario

DEFAULT_SEED = 2024


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; the CLI contract wants 1
    def error(self, message):
        raise UsageError(message)


def _default_seed() -> int:
    env = os.environ.get("RSOBF_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"RSOBF_SEED must be an integer, got {env!r}") from exc
    return DEFAULT_SEED


def build_parser() -> _Parser:
    p = _Parser(prog="rsobf", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analytic", help="evaluate a sum-capacity scaling law")
    a.add_argument("--law", required=True, choices=sorted(LAW_IDS))
    a.add_argument("--k", required=True, type=int, help="number of users")
    a.add_argument("--rho-r", type=float, default=1.0)
    a.add_argument("--rho-b", type=float, default=1.0)
    a.add_argument("--n", type=int, default=1, help="surface elements")
    a.add_argument("--m", type=int, default=1, help="BS antennas")
    a.add_argument("--beta", type=float, default=1.0)
    a.add_argument("--kappa", type=float, default=0.0)
    a.add_argument("--kappa-b", type=float, default=0.0)
    a.add_argument("--lambda-max", type=float, default=1.0)
    a.add_argument("--subcarriers", "--l", type=int, default=1)
    a.add_argument("--tr-r-inv", type=float, default=None)

    s = sub.add_parser("simulate", help="Monte-Carlo sum rate of a config")
    s.add_argument("--config", required=True)
    s.add_argument("--slots", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--pipeline", choices=("auto", "single", "miso"),
                   default="auto")
    s.add_argument("--whitening", action="store_true",
                   help="MISO pipeline: feed back the whitened SNR")

    f = sub.add_parser("figure", help="emit CSV data behind one figure")
    f.add_argument("figure", choices=FIGURES)
    f.add_argument("--out", required=True)
    f.add_argument("--slots", type=int, default=100_000)
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--jobs", type=int, default=1)
    return p


def _cmd_analytic(args) -> int:
    spec = ScalingLawSpec(law=args.law, rho_r=args.rho_r, rho_b=args.rho_b,
                          n=args.n, m=args.m, beta=args.beta,
                          kappa=args.kappa, kappa_b=args.kappa_b,
                          lambda_max=args.lambda_max,
                          subcarriers=args.subcarriers,
                          tr_r_inv=args.tr_r_inv)
    print(f"{scaling_law(spec, args.k):.9g}")
    return 0


def _cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(args.config)
    except FileNotFoundError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    seed = args.seed if args.seed is not None else _default_seed()
    pipeline = args.pipeline
    if pipeline == "auto":
        miso_like = (scenario.bs_antennas > 1 and scenario.rs is not None
                     and scenario.direct_fading is None)
        pipeline = "miso" if miso_like else "single"
    if pipeline == "miso":
        est = scheduler.estimate_miso_sum_rate(scenario, args.slots, seed,
                                               whitening=args.whitening,
                                               n_jobs=args.jobs)
    elif scenario.subcarriers > 1:
        est = scheduler.estimate_ofdma_sum_rate(scenario, args.slots, seed,
                                                n_jobs=args.jobs)
    else:
        est = scheduler.estimate_sum_rate(scenario, args.slots, seed,
                                          n_jobs=args.jobs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "sum_rate", "stderr", "label", "kind"])
        w.writerow([f"{scenario.users:.9g}", f"{est.mean:.9g}",
                    f"{est.stderr:.9g}", Path(args.config).stem, "sim"])
    return 0


def _cmd_figure(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    job = FigureJob(figure=args.figure, out_dir=Path(args.out),
                    slots=args.slots, seed=seed, n_jobs=args.jobs)
    for path in run_figure(job):
        print(path)
    return 0


def cli_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analytic":
            return _cmd_analytic(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "figure":
            return _cmd_figure(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch())


if __name__ == "__main__":
    main()
