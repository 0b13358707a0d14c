"""``advest`` command line: table presets, custom runs and the randomized bound check."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .experiments import (PRESETS, ConfigError, load_config, run_custom, run_preset,
                          run_property_suite)


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_preset(args) -> int:
    t0 = time.perf_counter()
    table = run_preset(args.name)
    _write(table.to_csv(), args.out)
    logging.info("%s: %d runs in %.2f s", args.name, len(table.all_cases), time.perf_counter() - t0)
    if table.violations:
        print(f"error: guaranteed bound violated in {table.violations} run(s)", file=sys.stderr)
        return 1
    return 0


def cmd_run(args) -> int:
    text, origin = None, ""
    if args.config:
        text, origin = Path(args.config).read_text(), args.config
    overrides = {"method": args.method, "k": args.k, "kprime": args.kprime, "elements": args.elements,
                 "beta": args.beta, "source": args.source, "mesh": args.mesh, "grading": args.grading,
                 "domain": args.domain, "c_osc": args.c_osc, "out": args.out}
    try:
        cfg = load_config(text, origin, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    res = run_custom(cfg)
    _write(res.to_csv(), cfg.out)
    if res.violations:
        print(f"error: guaranteed bound violated in {res.violations} run(s)", file=sys.stderr)
        return 1
    return 0


def cmd_check(args) -> int:
    t0 = time.perf_counter()
    res = run_property_suite(args.seed, args.cases)
    bad = res.violations
    print(f"seed={args.seed} cases={args.cases} orthogonal={res.n_orthogonal} "
          f"violations={len(bad)} worst_margin={res.worst_margin:.3e} "
          f"time={time.perf_counter() - t0:.1f}s")
    for i in bad:
        c, r = res.cases[i], res.results[i]
        print(f"  case {i}: {c.method} k={c.k} n={c.n} beta={c.beta:.3e} "
              f"error={r.report.error:.6e} eta={r.report.eta:.6e}")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="advest", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="reproduce one of the reference tables as CSV")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_preset)

    r = sub.add_parser("run", help="custom run from a key=value config and/or flags")
    r.add_argument("--config", help="key = value file; flags override it")
    r.add_argument("--method", choices=["pg1", "pg2", "dg"])
    r.add_argument("--k", type=str)
    r.add_argument("--kprime", type=str, help="defaults to k")
    r.add_argument("--elements", help="comma separated element counts")
    r.add_argument("--beta", help="comma separated velocities")
    r.add_argument("--source", help="arctan | piecewise_quadratic | poly:c0,c1,...")
    r.add_argument("--mesh", choices=["uniform", "graded"])
    r.add_argument("--grading", type=str, help="ratio of neighbouring element sizes")
    r.add_argument("--domain", help="a,b")
    r.add_argument("--c-osc", dest="c_osc", type=str, help="constant of the oscillation term (>= 1/pi)")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="randomized check of the guaranteed bound")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--cases", type=int, default=200)
    c.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
