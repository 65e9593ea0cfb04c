"""Command line entry point: ``pwbddc solve | sweep | verify``."""
from __future__ import annotations

import argparse
import json
import sys

from .bench import emit_report, run_case, sweep
from .config import CaseConfig, parse_kappa, parse_theta, read_config_file
from .errors import PWBDDCError

VERIFY_DEFAULTS = {"kappa": "2pi", "p": 6, "n": 2, "m": 1, "theta_f": "1000",
                   "theta_e": "1000"}


def _case_options():
    parser = argparse.ArgumentParser(add_help=False)
    g = parser.add_argument_group("case")
    g.add_argument("--config", help="key = value file; command line flags override it")
    g.add_argument("--kappa", help="wave number, e.g. 8pi or 25.1")
    g.add_argument("--p", type=int, help="plane waves per element")
    g.add_argument("--n", type=int, help="subdomains per axis")
    g.add_argument("--m", type=int, help="complete elements per subdomain per axis")
    g.add_argument("--theta-f", dest="theta_f", help="face tolerance, e.g. 4m or 1+log(m)")
    g.add_argument("--theta-e", dest="theta_e", help="edge tolerance")
    g.add_argument("--scaling", choices=("deluxe", "multiplicity"))
    g.add_argument("--economic", dest="economic", action="store_true", default=None,
                   help="eigenproblems on slabs (default)")
    g.add_argument("--no-economic", dest="economic", action="store_false")
    g.add_argument("--eta", help="slab width; may use h, e.g. 2h")
    g.add_argument("--levels", type=int, help="number of levels (2 = two-level)")
    g.add_argument("--rtol", type=float, help="outer PCG relative residual")
    g.add_argument("--coarse-rtol", dest="coarse_rtol", type=float,
                   help="inner PCG relative residual on coarse levels")
    g.add_argument("--maxit", type=int, help="PCG iteration cap")
    g.add_argument("--flexible", action="store_true", default=None,
                   help="flexible CG update")
    g.add_argument("--seed", type=int)
    g.add_argument("--threads", type=int, help="worker threads")
    g.add_argument("--deterministic", action="store_true", default=None,
                   help="single worker, ordered reductions")
    g.add_argument("--format", choices=("json", "csv"), default=None)
    g.add_argument("--out", help="report file (CSV rows are appended); default stdout")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _case_options()
    parser = argparse.ArgumentParser(
        prog="pwbddc",
        description="Plane-wave Helmholtz solves with adaptive BDDC preconditioning.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="run one case and report")
    sw = sub.add_parser("sweep", parents=[common], help="run a tolerance sweep")
    sw.add_argument("--thetas", nargs="+", required=True,
                    help="tolerance values or expressions")
    sw.add_argument("--which", choices=("both", "face", "edge"), default="both",
                    help="tolerances to vary")
    sub.add_parser("verify", parents=[common],
                   help="run the invariant suite on a small configuration")
    return parser


def case_from_args(args, defaults=None) -> CaseConfig:
    values = dict(defaults or {})
    if args.config:
        values.update(read_config_file(args.config))
    for name in CaseConfig.field_names():
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    return CaseConfig(**values)


def _verify(config: CaseConfig, fmt: str, out) -> int:
    from .oracle import invariant_suite

    theta_f = parse_theta(config.theta_f, config.m)
    theta_e = parse_theta(config.theta_e, config.m)
    checks = invariant_suite(config.n, config.m, config.p, parse_kappa(config.kappa),
                             config.scaling, theta_f, theta_e, seed=config.seed)
    ok = all(c.passed for c in checks)
    if fmt == "json":
        text = json.dumps({"schema": "pwbddc.verify-report", "schema_version": 1,
                           "config": config.to_dict(), "passed": ok,
                           "checks": [c.__dict__ for c in checks]},
                          indent=2, sort_keys=True) + "\n"
    else:
        text = "".join(c.line() + "\n" for c in checks)
    if out and out != "-":
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print("".join(c.line() + "\n" for c in checks), end="")
    else:
        print(text, end="")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            config = case_from_args(args, VERIFY_DEFAULTS)
            return _verify(config, args.format or "text", args.out)
        config = case_from_args(args)
        if args.command == "solve":
            fmt = args.format or "json"
            report = run_case(config)
            text = emit_report(report, fmt, args.out)
            if args.out is None or args.out == "-":
                print(text, end="")
            return 0
        fmt = args.format or "csv"
        reports = sweep(config, args.thetas, args.which)
        for i, report in enumerate(reports):
            if fmt == "json" and (args.out is None or args.out == "-"):
                print(emit_report(report, "json"), end="")
            elif fmt == "json":
                emit_report(report, "json", f"{args.out}.{i}.json" if len(reports) > 1
                            else args.out)
            else:
                text = emit_report(report, "csv", args.out)
                if text:
                    print(text if i == 0 else text.split("\n", 1)[1], end="")
        return 0
    except PWBDDCError as exc:
        print(f"pwbddc: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"pwbddc: error: {exc}", file=sys.stderr)
        return 2
    except MemoryError:
        print("pwbddc: error: out of memory", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
