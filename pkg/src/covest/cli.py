"""Command line entry point: ``covest estimate|sample|bench|verify``."""

import argparse
import sys

import numpy as np

from . import bench, verify
from .errors import CovestError
from .sampling import RandomStream, read_samples, write_samples
from .tournament import PipelineConfig, estimate_covariance


def _cmd_estimate(args):
    if args.input == "-":
        x = read_samples(sys.stdin)
    else:
        with open(args.input) as fh:
            x = read_samples(fh)
    cfg = PipelineConfig(symmetrize=not args.no_symmetrize, kappa=args.kappa,
                         n_random=args.dirs, seed=args.seed)
    report = estimate_covariance(x, args.delta, args.mode, cfg)
    for row in report.estimate:
        print(",".join(f"{v:.17g}" for v in row))
    for key, value in report.summary().items():
        print(f"{key}={value}", file=sys.stderr)
    return 0


def _cmd_sample(args):
    sigma = bench.parse_shape(args.shape, args.d)
    spec = bench.make_distribution(args.dist, sigma, args.nu)
    x = spec.sample(args.n, RandomStream(args.seed, args.stream))
    write_samples(x, sys.stdout, header=args.header)
    return 0


def _cmd_bench(args):
    cfg = bench.load_config(args.config)
    out = args.out or cfg.out
    if not out:
        raise SystemExit("covest bench: no output path (use --out or set 'out' in the config)")
    try:
        result = bench.run_sweep(cfg, jobs=args.jobs, out=out, timing=not args.no_timing)
    except KeyboardInterrupt:
        print(f"interrupted; partial results written to {out}", file=sys.stderr)
        return 130
    failed = sum(r.status != "ok" for r in result.records)
    print(f"{len(result.records)} records written to {out} ({failed} with estimator failures)",
          file=sys.stderr)
    print(f"summary written to {bench.summary_path(out)}", file=sys.stderr)
    return 0


def _cmd_verify(args):
    alphas = [float(a) for a in args.alpha_grid.split(",")]
    results = verify.run_suite(args.law, alphas, args.resolution)
    print(verify.format_table(results))
    failed = [r for r in results if r.failed]
    print(f"\n{len(results) - len(failed)}/{len(results)} checks did not fail")
    return 2 if failed else 0


def build_parser():
    parser = argparse.ArgumentParser(prog="covest", description="Robust covariance estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate a covariance matrix from CSV samples")
    p.add_argument("--input", required=True, help="CSV file of samples, one per row ('-' for stdin)")
    p.add_argument("--delta", type=float, required=True, help="failure probability")
    p.add_argument("--mode", choices=["subgaussian", "heavy"], default="subgaussian")
    p.add_argument("--no-symmetrize", action="store_true")
    p.add_argument("--kappa", type=float, default=4.0, help="stage-2 truncation multiplier")
    p.add_argument("--dirs", type=int, default=None, help="random direction pairs per tournament")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("sample", help="draw samples from a built-in law as CSV")
    p.add_argument("--dist", choices=bench.DISTRIBUTIONS, default="gaussian")
    p.add_argument("--shape", default="identity", help="identity | rank1 | diag(a,b,...) | decay(q)")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--nu", type=int, default=None, help="degrees of freedom for student_t")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("bench", help="run a Monte Carlo sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-timing", action="store_true", help="omit wall-time columns")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("verify", help="run the exact-oracle check suite")
    p.add_argument("--law", action="append", choices=verify.LAWS,
                   help="restrict to a law (repeatable); default all")
    p.add_argument("--alpha-grid", default=",".join(str(a) for a in verify.DEFAULT_ALPHA_GRID))
    p.add_argument("--resolution", type=float, default=None,
                   help="degrees (d=2) or number of sphere points (d=3)")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CovestError, ValueError, OSError) as exc:
        print(f"covest {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
