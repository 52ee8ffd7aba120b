"""Command line entry point: ``ddsde-avg <subcommand> [--config FILE] [--seed N] [--threads N] [--out DIR]``.

Exit codes: 0 all gates pass, 1 a gate failed, 2 configuration or runtime error.
"""
import argparse
import sys

from . import harness
from .errors import ConfigurationError, DivergenceError, EvaluationError, ResolutionError

SUBCOMMANDS = {
    "rates": "rates_table",
    "simulate": "simulate",
    "strong-study": "strong_study",
    "weak-study": "weak_study",
    "kbm-check": "kbm_check",
    "fluct-check": "fluct_check",
}


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="INI file with section.key options")
    p.add_argument("--seed", type=int, help="override experiment.seed")
    p.add_argument("--threads", type=int, help="override experiment.threads")
    p.add_argument("--out", help="override experiment.output_dir")
    return p


def build_parser():
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="ddsde-avg", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, parents=[_global_flags()])
        if name == "rates":
            sp.add_argument("--alpha", default=None, help="omega power or 'log'")
            sp.add_argument("--d", type=int, default=None)
            sp.add_argument("--p0", default=None)
            sp.add_argument("--ell", type=float, default=None)
            sp.add_argument("--delta", type=float, default=None)
            sp.add_argument("--alpha2", type=float, default=None)
            sp.add_argument("--eps", default=None, help="comma separated epsilon list")
            sp.add_argument("--mu-independent", action="store_true")
    return parser


def _merge_globals(args, argv):
    # flags may be given before or after the subcommand; the later one wins
    pre = _global_flags().parse_known_args(argv[: argv.index(args.command)] if args.command in argv else [])[0]
    for key in ("config", "seed", "threads", "out"):
        if getattr(args, key) is None:
            setattr(args, key, getattr(pre, key))
    return args


def _rates_spec(args):
    raw = {"experiment.kind": "rates_table", "experiment.seed": str(args.seed or 0)}
    pairs = {
        "rates.alpha": args.alpha, "rates.d": args.d, "rates.p0": args.p0, "rates.ell": args.ell,
        "rates.delta": args.delta, "rates.alpha2": args.alpha2, "rates.eps_list": args.eps,
    }
    raw.update({k: str(v) for k, v in pairs.items() if v is not None})
    if args.mu_independent:
        raw["rates.mu_dependent"] = "false"
    return harness.spec_from_mapping(raw)


def _print_table(report):
    cols = report.columns
    print("  ".join(cols))
    for row in report.rows:
        print("  ".join(harness.format_value(row.get(c)) for c in cols))


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _merge_globals(args, argv)
    kind = SUBCOMMANDS[args.command]
    try:
        if args.config:
            spec = harness.parse_config(args.config)
            if spec.kind != kind:
                raise ConfigurationError(
                    f"config declares experiment.kind={spec.kind!r} but subcommand {args.command!r} needs {kind!r}"
                )
        elif kind == "rates_table":
            spec = _rates_spec(args)
        else:
            raise ConfigurationError(f"{args.command} requires --config")
        harness.apply_overrides(spec, seed=args.seed, threads=args.threads, out=args.out)
        report = harness.run(spec)
        paths = harness.write_report(report, spec.output_dir)
    except (ConfigurationError, ResolutionError, EvaluationError, DivergenceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if kind == "rates_table":
        _print_table(report)
    for p in paths:
        print(f"wrote {p}")
    gates = report.summary.get("gates", {})
    for name, ok in gates.items():
        print(f"gate {name}: {'PASS' if ok else 'FAIL'}")
    if report.passed is False:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
