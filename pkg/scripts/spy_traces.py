"""Spy traces for one key with and without protection, side by side.

Writes a CSV with columns window,unprotected,protected and prints the
leakage summary for both runs. Windows missing from the shorter trace are
left blank.
"""

import argparse
import csv
import random
from itertools import zip_longest

from ddmsim.attack import SecretKey, leakage_report, recover_secret
from ddmsim.cli import resolve_scenario_path
from ddmsim.engine import run
from ddmsim.scenario import load_scenario


def capture(scn, key):
    spy = next(p.pid for p in scn.processes if p.stream.kind == "spy")
    victim = next(p.pid for p in scn.processes if p.stream.kind == "victim")
    result = run(scn.with_key(key))
    other = run(scn.with_key(key.complement()))
    trace = result.spy_traces[spy]
    window = result.protection_windows.get(victim)
    report = leakage_report(
        recover_secret(trace, len(key), scn.profile),
        key,
        trace,
        other_trace=other.spy_traces[spy],
        protection_window=None if window is None else (window[0], window[1] + 1),
        origin=result.spy_origin[spy],
    )
    return trace, report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="attack.scn")
    ap.add_argument("--bits", type=int, default=32)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="spy_traces.csv")
    args = ap.parse_args()

    scn = load_scenario(resolve_scenario_path(args.scenario))
    key = SecretKey.random(args.bits, random.Random(args.seed))
    plain, plain_rep = capture(scn.without_demands(), key)
    guarded, guarded_rep = capture(scn, key)

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "unprotected", "protected"])
        for i, (a, b) in enumerate(zip_longest(plain.elapsed, guarded.elapsed)):
            w.writerow([i, "" if a is None else a, "" if b is None else b])

    print(f"key={key}")
    for name, rep in (("unprotected", plain_rep), ("protected", guarded_rep)):
        print(f"[{name}]")
        print(rep.to_text())
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
