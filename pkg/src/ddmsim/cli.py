"""Command-line front end.

Exit codes: 0 success, 1 invalid input (scenario, flags), 2 runtime failure
(cycle budget exhausted, I/O).
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .attack import SecretKey, leakage_report, recover_secret
from .engine import run as run_scenario
from .errors import ConfigError, DDMError, DeadlineError, ValidationError
from .policy import build_default_action_map, compute_cd, format_action_map
from .registers import DEMAND_LEVELS
from .report import BenchConfig, BenchMode, emit_csv, format_table, rows_to_csv, run_bench
from .scenario import load_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
LOG_LEVELS = ("quiet", "timeline", "debug")


def _log_mode() -> str:
    mode = os.environ.get("DDM_SIM_LOG", "timeline").strip().lower()
    return mode if mode in LOG_LEVELS else "timeline"


def resolve_scenario_path(name: str) -> Path:
    """A path on disk, or the name of a scenario bundled with the package."""
    p = Path(name)
    if p.exists():
        return p
    bundled = resources.files("ddmsim") / "scenarios" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    return p


def _load(name):
    path = resolve_scenario_path(name)
    if not path.is_file():
        raise ValidationError([f"{name}: no such scenario file"])
    return load_scenario(path)


def cmd_run(args, out) -> int:
    scn = _load(args.scenario)
    result = run_scenario(scn)
    if _log_mode() != "quiet":
        out.write(result.timeline_text(include_stalls=not args.no_stalls))
    for lc, word in scn.demand_map().register_images().items():
        out.write(f"# demand register core {lc}: {word.hex()}\n")
    for pid in sorted(result.completion):
        out.write(f"# {pid}: start {result.start[pid]} completion {result.completion[pid]}\n")
    out.write(f"# total_cycles {result.total_cycles}\n")
    return EXIT_OK


def _attack_key(args, scn) -> SecretKey:
    if args.key:
        return SecretKey.from_hex(args.key)
    if args.random_bits:
        return SecretKey.random(args.random_bits, random.Random(scn.seed))
    victims = [p for p in scn.processes if p.stream.kind == "victim"]
    if not victims:
        raise ValidationError(["scenario has no victim process (stream = victim:BITS)"])
    return SecretKey.from_str(victims[0].stream.bits)


def cmd_attack(args, out) -> int:
    scn = _load(args.scenario)
    spies = [p.pid for p in scn.processes if p.stream.kind == "spy"]
    victims = [p.pid for p in scn.processes if p.stream.kind == "victim"]
    if not spies or not victims:
        raise ValidationError(["attack scenario needs one victim:... and one spy:... process"])
    if args.no_ddm:
        scn = scn.without_demands()
    key = _attack_key(args, scn)
    scn = scn.with_key(key)
    result = run_scenario(scn)
    other = run_scenario(scn.with_key(key.complement()))
    spy, victim = spies[0], victims[0]
    trace = result.spy_traces[spy]
    recovered = recover_secret(trace, len(key), scn.profile)
    window = result.protection_windows.get(victim)
    report = leakage_report(
        recovered,
        key,
        trace,
        other_trace=other.spy_traces[spy],
        protection_window=None if window is None else (window[0], window[1] + 1),
        origin=result.spy_origin.get(spy, 0),
    )
    emit_csv(trace, args.trace)
    out.write(f"key={key}\nrecovered={''.join(map(str, recovered))}\n")
    out.write(f"protected={'true' if window is not None else 'false'}\n")
    out.write(report.to_text() + "\n")
    out.write(f"trace_csv={args.trace}\n")
    return EXIT_OK


def cmd_bench(args, out) -> int:
    scn = _load(args.scenario)
    modes = tuple(BenchMode.parse(m) for m in args.modes.split(",") if m.strip())
    if not modes:
        raise ValidationError(["--modes is empty"])
    rows = run_bench(BenchConfig(Path(args.scenario).stem, scn, modes, args.reps))
    out.write(format_table(rows) + "\n")
    if args.csv:
        emit_csv(rows, args.csv)
    elif _log_mode() == "debug":
        out.write(rows_to_csv(rows))
    return EXIT_OK


def cmd_actionmap(args, out) -> int:
    am = build_default_action_map()
    if args.scenario:
        am = _load(args.scenario).action_map()
    if (args.sd is None) != (args.pd is None):
        raise ValidationError(["--sd and --pd must be given together"])
    if args.sd is not None:
        for name, v in (("sd", args.sd), ("pd", args.pd)):
            if v not in DEMAND_LEVELS:
                raise ValidationError([f"--{name} must be in 0..3, got {v}"])
        out.write(am[(args.sd, args.pd)].name + "\n")
        if _log_mode() == "debug":
            out.write(f"# cd={compute_cd(args.sd, args.pd).cd:.6g}\n")
        return EXIT_OK
    out.write(format_action_map(am) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddmsim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and print its timeline")
    p.add_argument("scenario")
    p.add_argument("--no-stalls", action="store_true", help="omit STALL events from the timeline")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("attack", help="run the victim/spy scenario and analyse the spy trace")
    p.add_argument("scenario")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--key", help="victim key as hex, most significant bit first")
    g.add_argument("--random-bits", type=int, metavar="N", help="random N-bit key from sim.seed")
    p.add_argument("--no-ddm", action="store_true", help="drop registered demands (unprotected run)")
    p.add_argument("--trace", default="spy_trace.csv", help="where to write the window,elapsed CSV")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="compare total cycles across mitigation modes")
    p.add_argument("scenario")
    p.add_argument("--modes", default="smt-on,ddm,static-off")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--csv", help="write workload,mode,cycles,slowdown rows here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("actionmap", help="print the resolved action map")
    p.add_argument("--sd", type=int)
    p.add_argument("--pd", type=int)
    p.add_argument("--scenario", help="apply this scenario's action overrides")
    p.set_defaults(func=cmd_actionmap)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    mode = _log_mode()
    logging.basicConfig(
        level=logging.DEBUG if mode == "debug" else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args, out)
    except ValidationError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DeadlineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.partial is not None and mode != "quiet":
            out.write(exc.partial.timeline_text())
        return EXIT_RUNTIME
    except (OSError, DDMError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
