"""Slowdown of DDM and static SMT-off against the SMT-on baseline.

Sweeps the protected process length on the mixed 4x2 workload so the
protected duty cycle grows, and writes one CSV row per (length, mode).
"""

import argparse
import csv

from ddmsim.engine import run
from ddmsim.report import BenchConfig, BenchMode, mixed_workload, run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lengths", default="20,40,80,160,320")
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--sd", type=int, default=1)
    ap.add_argument("--pd", type=int, default=1)
    ap.add_argument("--out", default="slowdown.csv")
    args = ap.parse_args()

    rows = []
    for n in (int(x) for x in args.lengths.split(",")):
        scn = mixed_workload(protected_ops=n, demand=(args.sd, args.pd))
        r = run(scn)
        start, last = r.protection_windows.get("key", (0, -1))
        duty = (last - start + 1) / r.total_cycles
        for row in run_bench(BenchConfig(f"key{n}", scn, repetitions=args.reps)):
            rows.append((n, f"{duty:.3f}", row.mode.value, f"{row.cycles_mode:.1f}", f"{row.slowdown:.4f}"))
            if row.mode is not BenchMode.SMT_ON_BASELINE:
                print(f"ops={n:<4} duty={duty:.3f} {row.mode.value:<10} slowdown={row.slowdown:+.4f}")

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["protected_ops", "duty", "mode", "cycles", "slowdown"])
        w.writerows(rows)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
