"""Cycle-level simulator of SMT cores sharing execution ports.

Timing model: every op takes one cycle on one port, each logical core issues
at most one op per cycle, and sibling cores asking for the same port in the
same cycle are arbitrated round-robin; losers stall for that cycle and retry.

Each cycle runs four phases in order:

1. retire   - free cores whose process finished last cycle, close protection
              scopes, resume cores nothing else keeps halted, admit blocked
              processes whose blocker went away
2. arrive   - enqueue processes arriving this cycle, blocking those whose core
              is inside an active halt set
3. dispatch - start the head of each idle core's queue; a protected process
              opens its scope here and halts the cores in it
4. issue    - arbitrate ports per physical core and issue one op per winner

A process that issues its last op at cycle ``t`` logs FINISH at ``t`` and its
completion cycle is ``t + 1``; cores it kept halted resume at ``t + 1``.
"""

from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .attack import SpyTrace
from .errors import DeadlineError, PolicyViolationError, SimStateError, ValidationError
from .policy import ProtectionScope, build_default_action_map, protection_scope
from .registers import ActionId, ActionMap, DemandMap, lookup_action
from .topology import Topology

log = logging.getLogger(__name__)

DEFAULT_PORTS = 3


class EventKind(enum.IntEnum):
    # value order is the tie-break order inside a cycle
    ARRIVE = 0
    START = 1
    BLOCK = 2
    ADMIT = 3
    HLT = 4
    RESUME = 5
    FINISH = 6
    STALL = 7


@dataclass(frozen=True, order=True)
class Event:
    cycle: int
    kind: EventKind
    core: int
    pid: str

    def line(self) -> str:
        return f"{self.cycle},{self.kind.name},{self.core},{self.pid}"


NO_PID = "-"


@dataclass(frozen=True)
class Process:
    """A stream of port ops bound to one logical core.

    ``uid`` is the numeric process id matched against demand registers.
    ``window_size`` marks a spy: its elapsed cycles per batch of that many
    ops are recorded.
    """

    pid: str
    arrival: int
    core: int
    stream: tuple[int, ...]
    uid: int | None = None
    window_size: int | None = None


class CoreStatus(enum.Enum):
    IDLE = "idle"
    RUNNING = "running"
    HALTED = "halted"


class Admission(enum.Enum):
    ADMITTED = "admitted"
    BLOCKED = "blocked"


@dataclass
class CoreState:
    lc: int
    status: CoreStatus = CoreStatus.IDLE
    pid: str | None = None
    queue: deque = field(default_factory=deque)
    saved_status: CoreStatus | None = None
    saved_marker: tuple | None = None


@dataclass(frozen=True)
class HaltRecord:
    core: int
    halt_cycle: int
    resume_cycle: int | None
    marker_at_halt: tuple
    marker_at_resume: tuple | None


@dataclass
class _Job:
    proc: Process
    scope: ProtectionScope | None = None
    pos: int = 0
    blocked: bool = False
    block_cycle: int | None = None
    started: int | None = None
    last_issue: int | None = None
    window_mark: int = 0
    windows: list = field(default_factory=list)

    @property
    def done(self) -> bool:
        return self.started is not None and self.pos == len(self.proc.stream)


@dataclass(frozen=True)
class SimResult:
    timeline: tuple[Event, ...]
    completion: dict[str, int]
    start: dict[str, int]
    total_cycles: int
    spy_traces: dict[str, SpyTrace]
    spy_origin: dict[str, int]
    issues: tuple[tuple[int, int, str], ...]
    halts: tuple[HaltRecord, ...]
    protection_windows: dict[str, tuple[int, int]]
    blocks: tuple[tuple[str, int, int | None], ...]
    scopes: dict[str, ProtectionScope] = field(default_factory=dict)
    complete: bool = True

    def timeline_text(self, include_stalls: bool = True) -> str:
        lines = ["cycle,event,core,pid"]
        lines += [e.line() for e in self.timeline if include_stalls or e.kind is not EventKind.STALL]
        return "\n".join(lines) + "\n"


class PortArbiter:
    """Round-robin arbitration per (physical core, port).

    A priority list of thread slots is kept for each pair. The first slot in
    the list among the contenders wins and moves to the back, so with two
    threads the core that lost the last contended round wins the next one.
    Uncontested issues leave the list alone. Initial order favours the
    lower-numbered core.
    """

    def __init__(self, topology: Topology):
        self.topology = topology
        self._order: dict[tuple[int, int], list[int]] = {}

    def arbitrate(self, cycle: int, port: int, contenders: Iterable[int]) -> int:
        lcs = sorted(set(contenders))
        if not lcs:
            raise ValueError("arbitration needs at least one contender")
        if len(lcs) == 1:
            return lcs[0]
        phys = {self.topology.physical_of(lc) for lc in lcs}
        if len(phys) != 1:
            raise ValueError(f"contenders {lcs} span several physical cores")
        order = self._order.setdefault(
            (phys.pop(), port), list(range(self.topology.threads_per_core))
        )
        by_slot = {self.topology.thread_index(lc): lc for lc in lcs}
        slot = next(s for s in order if s in by_slot)
        order.remove(slot)
        order.append(slot)
        return by_slot[slot]


def _validate(topology, processes, port_count, cycle_budget, offline):
    errors = []
    if port_count < 1:
        errors.append(f"port_count must be >= 1, got {port_count}")
    if cycle_budget < 1:
        errors.append(f"cycle budget must be > 0, got {cycle_budget}")
    for lc in offline:
        if not 0 <= lc < topology.logical_count:
            errors.append(f"offline core {lc} does not exist")
    seen = set()
    for p in processes:
        if p.pid in seen:
            errors.append(f"duplicate process id {p.pid!r}")
        seen.add(p.pid)
        if not 0 <= p.core < topology.logical_count:
            errors.append(f"process {p.pid}: core {p.core} does not exist")
        elif p.core in offline:
            errors.append(f"process {p.pid}: core {p.core} is offline")
        if p.arrival < 0:
            errors.append(f"process {p.pid}: negative arrival {p.arrival}")
        bad = sorted({port for port in p.stream if not 0 <= port < port_count})
        if bad:
            errors.append(f"process {p.pid}: ports {bad} outside 0..{port_count - 1}")
        if p.window_size is not None and p.window_size < 1:
            errors.append(f"process {p.pid}: window size must be >= 1")
    if errors:
        raise ValidationError(errors)


class Simulator:
    def __init__(
        self,
        topology: Topology,
        processes: Sequence[Process],
        *,
        port_count: int = DEFAULT_PORTS,
        demand_map: DemandMap | None = None,
        action_map: ActionMap | None = None,
        cycle_budget: int = 1_000_000,
        ddm: bool = True,
        offline: Iterable[int] = (),
    ):
        offline = frozenset(offline)
        _validate(topology, processes, port_count, cycle_budget, offline)
        self.topology = topology
        self.port_count = port_count
        self.demand_map = demand_map if demand_map is not None else DemandMap(topology)
        self.action_map = action_map if action_map is not None else build_default_action_map()
        self.cycle_budget = cycle_budget
        self.ddm = ddm
        self.offline = offline
        self.arbiter = PortArbiter(topology)
        self.cores = [CoreState(lc) for lc in topology.logical_cores]
        self.cycle = 0

        self.jobs: dict[str, _Job] = {}
        for p in processes:
            self.jobs[p.pid] = _Job(p, scope=self._resolve_scope(p))
        # stable: equal arrivals keep input order
        self._pending = deque(sorted(self.jobs.values(), key=lambda j: j.proc.arrival))
        self._arrived: list[_Job] = []
        self._just_finished: list[_Job] = []
        self.active_scopes: dict[str, ProtectionScope] = {}
        self._events: list[Event] = []
        self._issues: list[tuple[int, int, str]] = []
        self._halts: list[HaltRecord] = []
        self._open_halts: dict[int, tuple[int, tuple]] = {}
        self._windows: dict[str, tuple[int, int]] = {}
        self._blocks: list[list] = []
        self._booted = False

    # -- policy plumbing -------------------------------------------------

    def _resolve_scope(self, p: Process) -> ProtectionScope | None:
        if not self.ddm or p.uid is None:
            return None
        rec = self.demand_map.get(p.core)
        if rec is None or rec.user_pid != p.uid:
            return None
        action = lookup_action(self.action_map, rec)
        if action is ActionId.A00:
            return None
        return protection_scope(action, p.core, self.topology)

    def is_protected(self, pid: str) -> bool:
        return self.jobs[pid].scope is not None

    def _protected_cores(self) -> set[int]:
        return {s.protected_core for s in self.active_scopes.values()}

    def _covered(self, lc: int) -> bool:
        return lc in self.offline or any(lc in s.halt_set for s in self.active_scopes.values())

    def admit(self, pid: str, lc: int | None = None) -> Admission:
        """Would ``pid`` be allowed to run on ``lc`` (default: its bound core) now?"""
        job = self.jobs[pid]
        lc = job.proc.core if lc is None else self.topology.check(lc)
        if self._covered(lc):
            return Admission.BLOCKED
        if job.scope is not None:
            scope = job.scope if lc == job.proc.core else protection_scope(
                job.scope.action, lc, self.topology
            )
            others = self._protected_cores() - {lc}
            if scope.halt_set & others:
                return Admission.BLOCKED
        return Admission.ADMITTED

    # -- halt / resume ---------------------------------------------------

    def _emit(self, kind: EventKind, lc: int, pid: str | None) -> None:
        self._events.append(Event(self.cycle, kind, lc, pid if pid is not None else NO_PID))

    def marker(self, lc: int) -> tuple:
        """Architectural state of ``lc``: bound process and its next op index."""
        core = self.cores[lc]
        if core.pid is None:
            return (None, 0)
        return (core.pid, self.jobs[core.pid].pos)

    def hlt(self, lc: int) -> CoreState:
        self.topology.check(lc)
        if lc in self._protected_cores():
            raise PolicyViolationError(f"core {lc} runs a protected process and cannot be halted")
        core = self.cores[lc]
        if core.status is CoreStatus.HALTED:
            return core
        core.saved_status = core.status
        core.saved_marker = self.marker(lc)
        core.status = CoreStatus.HALTED
        self._open_halts[lc] = (self.cycle, core.saved_marker)
        self._emit(EventKind.HLT, lc, core.pid)
        log.debug("cycle %d: halt core %d", self.cycle, lc)
        return core

    def resume(self, lc: int) -> CoreState:
        self.topology.check(lc)
        core = self.cores[lc]
        if core.status is not CoreStatus.HALTED:
            raise SimStateError(f"core {lc} is {core.status.value}, not halted")
        now = self.marker(lc)
        if now != core.saved_marker:
            raise SimStateError(f"core {lc} state changed while halted: {core.saved_marker} -> {now}")
        status = core.saved_status
        if status is CoreStatus.RUNNING and self.jobs[core.pid].done:
            status = CoreStatus.IDLE
            core.pid = None
        core.status = status
        halted_at, saved = self._open_halts.pop(lc)
        self._halts.append(HaltRecord(lc, halted_at, self.cycle, saved, now))
        core.saved_status = None
        core.saved_marker = None
        self._emit(EventKind.RESUME, lc, core.pid)
        log.debug("cycle %d: resume core %d", self.cycle, lc)
        return core

    # -- time dynamization -----------------------------------------------

    def on_protected_start(self, pid: str) -> None:
        job = self.jobs[pid]
        if job.scope is None:
            raise SimStateError(f"{pid} is not a protected process")
        self.active_scopes[pid] = job.scope
        self._windows[pid] = (self.cycle, self.cycle)
        for lc in sorted(job.scope.halt_set):
            self.hlt(lc)
        # processes still waiting on a core that just went dark are now blocked
        for other in self._arrived:
            if other.started is None and not other.blocked and self.admit(other.proc.pid) is Admission.BLOCKED:
                self._block(other)

    def on_protected_finish(self, pid: str) -> None:
        scope = self.active_scopes.pop(pid)
        for lc in sorted(scope.halt_set):
            if self.cores[lc].status is CoreStatus.HALTED and not self._covered(lc):
                self.resume(lc)

    def _block(self, job: _Job) -> None:
        job.blocked = True
        job.block_cycle = self.cycle
        self._blocks.append([job.proc.pid, self.cycle, None])
        self._emit(EventKind.BLOCK, job.proc.core, job.proc.pid)

    def _release_blocked(self) -> None:
        for job in self._arrived:
            if job.blocked and self.admit(job.proc.pid) is Admission.ADMITTED:
                job.blocked = False
                for rec in reversed(self._blocks):
                    if rec[0] == job.proc.pid and rec[2] is None:
                        rec[2] = self.cycle
                        break
                self._emit(EventKind.ADMIT, job.proc.core, job.proc.pid)

    # -- cycle phases ----------------------------------------------------

    def _boot(self) -> None:
        self._booted = True
        for lc in sorted(self.offline):
            self.hlt(lc)

    def _retire(self) -> None:
        finished, self._just_finished = self._just_finished, []
        for job in finished:
            core = self.cores[job.proc.core]
            if core.status is not CoreStatus.HALTED and core.pid == job.proc.pid:
                core.pid = None
                core.status = CoreStatus.IDLE
            if job.proc.pid in self.active_scopes:
                self.on_protected_finish(job.proc.pid)
        if finished:
            self._release_blocked()

    def _arrive(self) -> None:
        while self._pending and self._pending[0].proc.arrival == self.cycle:
            job = self._pending.popleft()
            self._arrived.append(job)
            self.cores[job.proc.core].queue.append(job.proc.pid)
            self._emit(EventKind.ARRIVE, job.proc.core, job.proc.pid)
            if self.admit(job.proc.pid) is Admission.BLOCKED:
                self._block(job)

    def _dispatch(self) -> None:
        for core in self.cores:
            if core.status is not CoreStatus.IDLE or not core.queue:
                continue
            job = self.jobs[core.queue[0]]
            if job.blocked:
                continue
            if self.admit(job.proc.pid) is Admission.BLOCKED:
                self._block(job)
                continue
            core.queue.popleft()
            core.pid = job.proc.pid
            core.status = CoreStatus.RUNNING
            job.started = self.cycle
            job.window_mark = self.cycle
            self._emit(EventKind.START, core.lc, job.proc.pid)
            if not job.proc.stream:
                self._finish(job)
            elif job.scope is not None:
                self.on_protected_start(job.proc.pid)

    def _finish(self, job: _Job) -> None:
        job.last_issue = self.cycle
        self._just_finished.append(job)
        if job.proc.pid in self._windows:
            self._windows[job.proc.pid] = (self._windows[job.proc.pid][0], self.cycle)
        self._emit(EventKind.FINISH, job.proc.core, job.proc.pid)

    def _issue_op(self, lc: int, job: _Job) -> None:
        job.pos += 1
        self._issues.append((self.cycle, lc, job.proc.pid))
        w = job.proc.window_size
        if w and job.pos % w == 0:
            end = self.cycle + 1
            job.windows.append((len(job.windows), end - job.window_mark))
            job.window_mark = end
        if job.pos == len(job.proc.stream):
            self._finish(job)

    def _issue(self) -> None:
        tpc = self.topology.threads_per_core
        for phys in range(self.topology.physical_count):
            wants: dict[int, list[int]] = {}
            for lc in range(phys * tpc, (phys + 1) * tpc):
                core = self.cores[lc]
                if core.status is not CoreStatus.RUNNING:
                    continue
                job = self.jobs[core.pid]
                if job.pos < len(job.proc.stream):
                    wants.setdefault(job.proc.stream[job.pos], []).append(lc)
            for port in sorted(wants):
                lcs = wants[port]
                winner = self.arbiter.arbitrate(self.cycle, port, lcs)
                for lc in lcs:
                    if lc != winner:
                        self._emit(EventKind.STALL, lc, self.cores[lc].pid)
                self._issue_op(winner, self.jobs[self.cores[winner].pid])

    def step(self) -> None:
        """Advance exactly one cycle."""
        if not self._booted:
            self._boot()
        self._retire()
        self._arrive()
        self._dispatch()
        self._issue()
        self.cycle += 1

    # -- driver ----------------------------------------------------------

    def _all_done(self) -> bool:
        return not self._pending and all(j.done for j in self._arrived)

    def _busy(self) -> bool:
        return bool(self._just_finished) or any(c.status is CoreStatus.RUNNING for c in self.cores)

    def run(self) -> SimResult:
        while not self._all_done():
            if self.cycle >= self.cycle_budget:
                raise DeadlineError(
                    f"cycle budget {self.cycle_budget} exhausted", partial=self.result(complete=False)
                )
            nxt = self._pending[0].proc.arrival if self._pending else None
            if (
                self._booted
                and nxt is not None
                and nxt > self.cycle
                and not self._busy()
                and not self._startable()
            ):
                # nothing can happen until the next arrival
                self.cycle = min(nxt, self.cycle_budget)
                continue
            self.step()
        if self._just_finished:
            self.step()  # release scopes held by the final processes
        return self.result()

    def _startable(self) -> bool:
        return any(
            c.status is CoreStatus.IDLE and c.queue and not self.jobs[c.queue[0]].blocked
            for c in self.cores
        )

    def result(self, complete: bool = True) -> SimResult:
        completion = {
            pid: j.last_issue + 1 if j.proc.stream else j.last_issue
            for pid, j in self.jobs.items()
            if j.last_issue is not None
        }
        traces = {
            pid: SpyTrace(tuple(j.windows), j.proc.window_size)
            for pid, j in self.jobs.items()
            if j.proc.window_size
        }
        origin = {
            pid: j.started for pid, j in self.jobs.items() if j.proc.window_size and j.started is not None
        }
        halts = list(self._halts) + [
            HaltRecord(lc, c, None, m, None) for lc, (c, m) in sorted(self._open_halts.items())
        ]
        return SimResult(
            timeline=tuple(sorted(self._events)),
            completion=completion,
            start={pid: j.started for pid, j in self.jobs.items() if j.started is not None},
            total_cycles=max(completion.values(), default=0),
            spy_traces=traces,
            spy_origin=origin,
            issues=tuple(self._issues),
            halts=tuple(halts),
            protection_windows=dict(self._windows),
            blocks=tuple(tuple(b) for b in self._blocks),
            scopes={pid: j.scope for pid, j in self.jobs.items() if j.scope is not None},
            complete=complete,
        )


def run(scenario, **overrides) -> SimResult:
    """Simulate a :class:`ddmsim.scenario.Scenario`."""
    return Simulator(**scenario.sim_kwargs(**overrides)).run()
