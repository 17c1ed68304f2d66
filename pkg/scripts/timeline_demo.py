"""Print the three-user timeline: A protected on lc0, B blocked on its sibling, C unaffected."""

import argparse

from ddmsim.engine import run
from ddmsim.scenario import load_scenario
from ddmsim.cli import resolve_scenario_path


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="fig5.scn")
    ap.add_argument("--stalls", action="store_true", help="include STALL events")
    args = ap.parse_args()

    result = run(load_scenario(resolve_scenario_path(args.scenario)))
    print(result.timeline_text(include_stalls=args.stalls), end="")
    for pid in sorted(result.completion):
        print(f"# {pid}: start {result.start[pid]} completion {result.completion[pid]}")
    for h in result.halts:
        print(f"# core {h.core} halted [{h.halt_cycle}, {h.resume_cycle})")


if __name__ == "__main__":
    main()
