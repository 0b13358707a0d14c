"""Regenerate the four preset tables as CSV files.

Usage: python3 scripts/reproduce_tables.py [outdir]
"""
import sys
import time
from pathlib import Path

from advest.experiments import PRESETS, run_preset


def main(outdir: str = "results") -> int:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    bad = 0
    for name in PRESETS:
        t0 = time.perf_counter()
        table = run_preset(name)
        (out / f"{name}.csv").write_text(table.to_csv())
        bad += table.violations
        print(f"{name}: {len(table.all_cases)} runs, {table.violations} violations, "
              f"{time.perf_counter() - t0:.1f}s -> {out / (name + '.csv')}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:2]))
