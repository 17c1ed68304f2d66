"""Shared helpers: random scenario generation and engine invariant checks."""

from __future__ import annotations

import random
from collections import Counter, defaultdict

from ddmsim.engine import EventKind, Process, Simulator
from ddmsim.registers import DemandMap, DemandRecord
from ddmsim.topology import Topology


def random_inputs(rng: random.Random, *, with_demands: bool = True) -> dict:
    """Keyword arguments for :class:`Simulator` describing a small random workload."""
    topo = Topology(rng.randint(1, 3), rng.randint(1, 3))
    ports = rng.randint(1, 3)
    procs = []
    for i in range(rng.randint(1, 8)):
        n = rng.randint(0, 25)
        procs.append(
            Process(
                pid=f"p{i}",
                arrival=rng.randint(0, 30),
                core=rng.randrange(topo.logical_count),
                stream=tuple(rng.randrange(ports) for _ in range(n)),
                uid=1000 + i,
            )
        )
    dm = DemandMap(topo)
    if with_demands:
        for p in procs:
            if rng.random() < 0.4:
                # sometimes register a demand for someone else's uid, which must not protect p
                uid = p.uid if rng.random() < 0.85 else 999
                dm.entries[p.core] = DemandRecord(uid, rng.randint(0, 3), rng.randint(0, 3))
    return dict(topology=topo, processes=procs, port_count=ports, demand_map=dm, cycle_budget=100_000)


def simulate(inputs: dict, **overrides):
    kw = dict(inputs)
    kw.update(overrides)
    return Simulator(**kw).run()


def _blocking_scopes(result, pid, core, t, opened_before=False):
    """Active scopes at cycle ``t`` that keep ``pid`` (bound to ``core``) from being admitted.

    Admission happens before dispatch, so with ``opened_before`` scopes opened
    during cycle ``t`` itself are ignored.
    """
    own = result.scopes.get(pid)
    out = []
    for other, (start, last) in result.protection_windows.items():
        if other == pid or not start <= t <= last or (opened_before and start == t):
            continue
        scope = result.scopes[other]
        if core in scope.halt_set or (own is not None and scope.protected_core in own.halt_set):
            out.append(other)
    return out


def invariant_violations(inputs: dict, result, rerun=None) -> list[str]:
    """Every engine invariant checked against one result. Empty list means clean."""
    bad = []
    procs = {p.pid: p for p in inputs["processes"]}

    # determinism
    if rerun is not None and (
        rerun.timeline_text() != result.timeline_text() or rerun.completion != result.completion
    ):
        bad.append("rerun produced a different timeline")

    # timeline ordering contract
    keys = [(e.cycle, e.kind, e.core) for e in result.timeline]
    if keys != sorted(keys):
        bad.append("timeline not ordered by (cycle, kind, core)")

    # every process completes; op conservation
    issued = Counter(pid for _, _, pid in result.issues)
    for pid, p in procs.items():
        if pid not in result.completion:
            bad.append(f"{pid} never completed")
        if issued[pid] != len(p.stream):
            bad.append(f"{pid} issued {issued[pid]} ops, stream has {len(p.stream)}")
        if result.start.get(pid, -1) < p.arrival:
            bad.append(f"{pid} started before arriving")

    # one op per core per cycle
    per_cycle = Counter((c, lc) for c, lc, _ in result.issues)
    if any(v > 1 for v in per_cycle.values()):
        bad.append("a core issued twice in one cycle")

    # halted cores issue nothing, and resume with the state they halted with
    by_core = defaultdict(list)
    for c, lc, pid in result.issues:
        by_core[lc].append(c)
    for h in result.halts:
        stop = h.resume_cycle if h.resume_cycle is not None else float("inf")
        if any(h.halt_cycle <= c < stop for c in by_core[h.core]):
            bad.append(f"core {h.core} issued while halted [{h.halt_cycle},{stop})")
        if h.resume_cycle is not None and h.marker_at_halt != h.marker_at_resume:
            bad.append(f"core {h.core} state changed across halt {h.marker_at_halt} -> {h.marker_at_resume}")

    # protected cores never halted, never stalled, inside their window
    for pid, (start, last) in result.protection_windows.items():
        core = procs[pid].core
        for h in result.halts:
            stop = h.resume_cycle if h.resume_cycle is not None else float("inf")
            if h.core == core and h.halt_cycle <= last and stop > start:
                bad.append(f"protected {pid} core {core} halted during its window")
        for e in result.timeline:
            if e.kind is EventKind.STALL and e.core == core and start <= e.cycle <= last:
                bad.append(f"protected {pid} stalled at {e.cycle}")
        scope = result.scopes[pid]
        for lc in scope.halt_set:
            if any(start <= c <= last for c in by_core[lc]):
                bad.append(f"core {lc} issued inside {pid}'s protection window")

    # blocked processes: blocked exactly while a scope blocks them, admitted the first cycle none does
    order_by_core = defaultdict(list)
    for pid, blocked_at, admitted_at in result.blocks:
        if admitted_at is None:
            bad.append(f"{pid} blocked at {blocked_at} and never admitted")
            continue
        core = procs[pid].core
        for t in range(blocked_at, admitted_at):
            if not _blocking_scopes(result, pid, core, t):
                bad.append(f"{pid} still blocked at {t} with no active blocker")
                break
        if _blocking_scopes(result, pid, core, admitted_at, opened_before=True):
            bad.append(f"{pid} admitted at {admitted_at} while still blocked")
        order_by_core[core].append((blocked_at, admitted_at, pid))
    for core, recs in order_by_core.items():
        admits = [a for _, a, _ in sorted(recs)]
        if admits != sorted(admits):
            bad.append(f"blocked processes on core {core} not admitted in FIFO order")
    return bad
