"""Command line entry point: ``kherding run|slope|check``."""

import argparse
import logging
import sys

from . import bench, checks


def _run(args):
    cfg = bench.load_config(args.config, methods=args.methods, seeds=args.seeds, out=args.out, jobs=args.jobs)
    rows, manifest = bench.run_experiment(cfg)
    failed = [r for r in manifest["runs"] if "error" in r]
    for r in manifest["runs"]:
        if "error" in r:
            print(f"{r['method']:>10} seed={r['seed']}  FAILED {r['error']}")
        else:
            print(f"{r['method']:>10} seed={r['seed']}  nodes={r['nodes']:5d}  mmd={r['final_mmd']:.4e}")
    print(f"wrote {manifest['csv']}")
    return 1 if failed else 0


def _slope(args):
    rows = bench.read_csv(args.csv)
    for (method, seed), run in sorted(bench.group_runs(rows).items()):
        try:
            s = bench.loglog_slope(run, args.x, args.lo, args.hi)
            print(f"{method:>10} seed={seed}  slope={s:+.4f}")
        except bench.AnalysisError as exc:
            print(f"{method:>10} seed={seed}  {exc}")
    return 0


def _check(args):
    return 0 if checks.run_suite(args.suite, seed=args.seed) else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="kherding", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--methods", nargs="+", choices=bench.METHODS)
    p.add_argument("--seeds", nargs="+", type=int)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.set_defaults(fn=_run)

    p = sub.add_parser("slope", help="fit log-log rates per run in a result CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", choices=["nodes", "time"], default="nodes")
    p.add_argument("--from", dest="lo", type=float)
    p.add_argument("--to", dest="hi", type=float)
    p.set_defaults(fn=_slope)

    p = sub.add_parser("check", help="run a built-in property suite")
    p.add_argument("--suite", choices=sorted(checks.SUITES), default="invariants")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_check)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
