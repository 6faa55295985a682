"""dlocontact {compare,trace,board,bench} [--scenario FILE] [--seeds N|LIST] ...

Exit codes: 0 ok, 2 config error, 3 a --check criterion failed.
"""
import argparse
import sys
from pathlib import Path

from . import harness as H
from .scenario import ConfigError, Scenario, parse_seeds

VERBS = {
    "compare": ("indicator_compare", "rising_patterns"),
    "trace": ("single_trace", "trace_ideal"),
    "board": ("board_run", "board"),
    "bench": ("bench", "bench"),
}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3


def build_parser():
    ap = argparse.ArgumentParser(prog="dlocontact", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, (kind, default) in VERBS.items():
        p = sub.add_parser(verb, help=f"run a {kind} scenario")
        p.add_argument("--scenario", default=f"builtin:{default}",
                       help=f"scenario file or builtin:NAME (default builtin:{default})")
        p.add_argument("--seeds", help="seed count N (0..N-1) or list like 3,5,9 or 10..19")
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("--workers", type=int, help="worker processes for sweeps")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a scenario key (repeatable)")
        p.add_argument("--check", action="store_true",
                       help="evaluate the scenario's check.* criteria; exit 3 on failure")
    return ap


def load_scenario(ref, overrides=()):
    if ref.startswith("builtin:"):
        sc = Scenario.builtin(ref[len("builtin:"):])
    else:
        sc = Scenario.from_file(ref)
    if overrides:
        items = {}
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            items[key.strip()] = value.strip()
        sc = sc.with_overrides(**items)
    return sc


def _report_checks(checks, out):
    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)
        failed += not ok
    return failed


def run(argv=None, out=sys.stdout):
    args = build_parser().parse_args(argv)
    kind, _ = VERBS[args.verb]
    try:
        sc = load_scenario(args.scenario, args.set)
        if sc.kind != kind:
            raise ConfigError(f"'{args.verb}' needs a {kind} scenario, got kind = {sc.kind}")
        seeds = parse_seeds(args.seeds) if args.seeds else sc.seeds
        if args.workers is not None and args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        H.validate(sc)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    command = " ".join(["dlocontact", args.verb] + (argv if argv is not None else sys.argv[1:])[1:])
    outputs = []
    checks = []

    if args.verb == "compare":
        rep = H.run_indicator_comparison(sc, seeds, args.workers)
        outputs.append(H.write_csv(out_dir / "compare.csv", H.COMPARE_SCHEMA,
                                   H.COMPARE_COLUMNS, rep.rows))
        outputs.append(H.write_csv(out_dir / "compare_summary.csv", H.COMPARE_SUMMARY_SCHEMA,
                                   ("indicator", "pattern", "config", "successes", "trials",
                                    "mean_latency"), rep.summary_rows()))
        print(rep.table(), file=out)
        checks = H.check_comparison(rep, sc)
    elif args.verb == "trace":
        results = []
        for seed in seeds:
            res = H.run_single_trace(sc, seed)
            results.append((seed, res))
            outputs.append(H.write_trace(res, out_dir / f"trace_seed{seed}.csv"))
            print(f"seed {seed}: sequence {res.seq.states} -> {res.verdict.value} "
                  f"({res.ticks} ticks)", file=out)
        checks = H.check_trace(results, sc)
    elif args.verb == "board":
        runs = H.run_board_experiment(sc, seeds, args.workers)
        outputs.append(H.write_csv(out_dir / "board.csv", H.BOARD_SCHEMA, H.BOARD_COLUMNS,
                                   H.board_rows(runs)))
        print(H.board_summary(runs), file=out)
        checks = H.check_board(runs, sc)
    else:
        rep = H.run_bench(sc, seeds[0])
        # timings differ run to run; this file is the one output that is not reproducible
        outputs.append(H.write_csv(out_dir / "bench.csv", H.BENCH_SCHEMA, ("metric", "value"),
                                   rep.rows()))
        print(rep.text(), file=out)
        checks = H.check_bench(rep, sc)

    H.write_manifest(out_dir, sc, seeds, command, outputs)
    print(f"wrote {', '.join(str(p) for p in outputs)} and {out_dir / 'manifest.json'}", file=out)

    if args.check and _report_checks(checks, out):
        return EXIT_CHECK
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
