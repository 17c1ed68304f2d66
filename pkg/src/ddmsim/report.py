"""Throughput comparison across mitigation modes, and CSV output."""

from __future__ import annotations

import csv
import enum
import io
import os
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .attack import SpyTrace
from .engine import Process, Simulator
from .errors import ConfigError
from .registers import DemandRecord
from .scenario import ProcessSpec, Scenario, StreamSpec


class BenchMode(enum.Enum):
    SMT_ON_BASELINE = "smt-on"
    DDM = "ddm"
    STATIC_SMT_OFF = "static-off"

    @classmethod
    def parse(cls, text: str) -> "BenchMode":
        for m in cls:
            if text.strip().lower() in (m.value, m.name.lower()):
                return m
        raise ConfigError(f"unknown mode {text!r} (expected smt-on, ddm or static-off)")


ALL_MODES = (BenchMode.SMT_ON_BASELINE, BenchMode.DDM, BenchMode.STATIC_SMT_OFF)


@dataclass(frozen=True)
class BenchConfig:
    name: str
    workload: Scenario | Mapping[BenchMode, Scenario]
    modes: tuple[BenchMode, ...] = ALL_MODES
    repetitions: int = 1

    def workload_for(self, mode: BenchMode) -> Scenario:
        if isinstance(self.workload, Scenario):
            return self.workload
        try:
            return self.workload[mode]
        except KeyError:
            raise ConfigError(f"no workload given for mode {mode.value}") from None


@dataclass(frozen=True)
class SlowdownRow:
    workload: str
    mode: BenchMode
    cycles_baseline: float
    cycles_mode: float

    @property
    def slowdown(self) -> float:
        if self.cycles_baseline == 0:
            return 0.0
        return (self.cycles_mode - self.cycles_baseline) / self.cycles_baseline


def static_off_processes(scn: Scenario, processes: Sequence[Process]) -> tuple[list[Process], frozenset[int]]:
    """Move every process onto its physical core's first thread; the rest go offline."""
    topo = scn.topology
    offline = frozenset(lc for lc in topo.logical_cores if topo.thread_index(lc) != 0)
    moved = [replace(p, core=topo.primary_thread(p.core)) for p in processes]
    return moved, offline


def mode_cycles(scn: Scenario, mode: BenchMode) -> int:
    processes = scn.build_processes()
    if mode is BenchMode.SMT_ON_BASELINE:
        sim = Simulator(**scn.sim_kwargs(ddm=False, processes=processes))
    elif mode is BenchMode.DDM:
        sim = Simulator(**scn.sim_kwargs(ddm=True, processes=processes))
    else:
        moved, offline = static_off_processes(scn, processes)
        sim = Simulator(**scn.sim_kwargs(ddm=False, processes=moved, offline=offline))
    return sim.run().total_cycles


def _signature(scn: Scenario) -> list:
    return [(p.pid, p.arrival, p.stream) for p in scn.build_processes()]


def run_bench(cfg: BenchConfig) -> list[SlowdownRow]:
    """Mean total cycles per mode over ``repetitions`` seeds, against the SMT-on baseline.

    Repetition ``i`` reseeds random streams with ``seed + i``; every mode sees
    the same streams for a given repetition.
    """
    if cfg.repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    modes = tuple(dict.fromkeys(cfg.modes))
    if isinstance(cfg.workload, Scenario) or BenchMode.SMT_ON_BASELINE in cfg.workload:
        base = cfg.workload_for(BenchMode.SMT_ON_BASELINE)
    else:
        base = cfg.workload_for(modes[0])
    ref = _signature(base)
    for mode in modes:
        if _signature(cfg.workload_for(mode)) != ref:
            raise ConfigError(f"workload for mode {mode.value} differs from the other modes")

    totals = {m: 0 for m in (BenchMode.SMT_ON_BASELINE, *modes)}
    for rep in range(cfg.repetitions):
        for mode in totals:
            scn = cfg.workload_for(mode) if mode in modes else base
            scn = replace(scn, seed=scn.seed + rep)
            totals[mode] += mode_cycles(scn, mode)
    baseline = totals[BenchMode.SMT_ON_BASELINE] / cfg.repetitions
    return [SlowdownRow(cfg.name, m, baseline, totals[m] / cfg.repetitions) for m in modes]


def mixed_workload(
    seed: int = 0,
    ops: int = 400,
    protected_ops: int = 80,
    protected_arrival: int = 100,
    demand: tuple[int, int] = (1, 1),
) -> Scenario:
    """Eight processes on a 4x2 machine, one per logical core.

    Seven are long random port streams; the one on core 0 is a short key
    process whose demand is registered, so only it triggers protection.
    """
    procs = [
        ProcessSpec("key", 0, StreamSpec("random", count=protected_ops), protected_arrival, uid=100)
    ]
    procs += [ProcessSpec(f"w{lc}", lc, StreamSpec("random", count=ops), 0, uid=100 + lc) for lc in range(1, 8)]
    return Scenario(
        physical=4,
        threads=2,
        seed=seed,
        processes=tuple(procs),
        demands=((0, DemandRecord(100, *demand)),),
    )


def _fmt(x: float) -> str:
    return format(x, ".6g")


def _open(path):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def rows_to_csv(rows: Iterable[SlowdownRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["workload", "mode", "cycles", "slowdown"])
    for r in rows:
        w.writerow([r.workload, r.mode.value, _fmt(r.cycles_mode), _fmt(r.slowdown)])
    return buf.getvalue()


def trace_to_csv(trace: SpyTrace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window", "elapsed"])
    for idx, elapsed in trace.windows:
        w.writerow([idx, elapsed])
    return buf.getvalue()


def emit_csv(data: Iterable[SlowdownRow] | SpyTrace, path: str | os.PathLike) -> None:
    text = trace_to_csv(data) if isinstance(data, SpyTrace) else rows_to_csv(data)
    with _open(path) as fh:
        fh.write(text)


def format_table(rows: Sequence[SlowdownRow]) -> str:
    lines = [f"{'workload':<12} {'mode':<10} {'cycles':>10} {'slowdown':>10}"]
    for r in rows:
        lines.append(f"{r.workload:<12} {r.mode.value:<10} {r.cycles_mode:>10.1f} {r.slowdown:>10.4f}")
    return "\n".join(lines)
