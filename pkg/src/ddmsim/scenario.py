"""Scenario files: a line-oriented ``section.key = value`` format.

Example::

    # three users, A protected on logical core 0
    topology.physical = 4
    topology.threads = 2
    sim.ports = 3
    process.A.core = 0
    process.A.uid = 1001
    process.A.stream = ops:0*12,1*12,2*12
    process.B.arrival = 6
    process.B.core = 1
    process.B.stream = ops:1*16
    demand.0 = 1001, 1, 1          # core = user pid, sd, pd
    action.3.3 = A01               # optional override of the default map

Stream specs:

    ops:P*N,P,...    explicit ports, run-length encoded
    victim:BITS      double-and-add victim for the given key bits
    spy:P            spy hammering port P, windows per ``attack.*``
    random:N         N ops on uniformly random ports (seeded by sim.seed)
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from .attack import SecretKey, VictimProfile, gen_spy, gen_victim, spy_windows_for
from .engine import DEFAULT_PORTS, Process
from .errors import InvalidDemandError, ScenarioError
from .policy import build_default_action_map
from .registers import ActionId, ActionMap, DemandMap, DemandRecord
from .topology import Topology

_NAME = re.compile(r"^[A-Za-z0-9_]+$")
STREAM_KINDS = ("ops", "victim", "spy", "random")


@dataclass(frozen=True)
class StreamSpec:
    kind: str
    ops: tuple[int, ...] = ()
    bits: str = ""
    port: int = 0
    count: int = 0

    @classmethod
    def parse(cls, text: str) -> "StreamSpec":
        kind, sep, body = text.strip().partition(":")
        kind = kind.strip()
        body = body.strip()
        if not sep or kind not in STREAM_KINDS:
            raise ValueError(f"stream must be one of {', '.join(k + ':...' for k in STREAM_KINDS)}")
        if kind == "ops":
            ops: list[int] = []
            for run in filter(None, (r.strip() for r in body.split(","))):
                port, star, n = run.partition("*")
                ops.extend([int(port)] * (int(n) if star else 1))
            return cls("ops", ops=tuple(ops))
        if kind == "victim":
            key = SecretKey.from_hex(body) if body.lower().startswith("0x") else SecretKey.from_str(body)
            return cls("victim", bits=str(key))
        if kind == "spy":
            return cls("spy", port=int(body))
        count = int(body)
        if count < 0:
            raise ValueError("random stream length must be >= 0")
        return cls("random", count=count)

    def __str__(self) -> str:
        if self.kind == "ops":
            runs, i = [], 0
            while i < len(self.ops):
                j = i
                while j < len(self.ops) and self.ops[j] == self.ops[i]:
                    j += 1
                runs.append(str(self.ops[i]) if j - i == 1 else f"{self.ops[i]}*{j - i}")
                i = j
            return "ops:" + ",".join(runs)
        if self.kind == "victim":
            return f"victim:{self.bits}"
        if self.kind == "spy":
            return f"spy:{self.port}"
        return f"random:{self.count}"

    def ports_used(self, profile: VictimProfile) -> set[int]:
        if self.kind == "ops":
            return set(self.ops)
        if self.kind == "victim":
            return {profile.double_port, profile.add_port} if "1" in self.bits else {profile.double_port}
        if self.kind == "spy":
            return {self.port}
        return set()


@dataclass(frozen=True)
class ProcessSpec:
    pid: str
    core: int
    stream: StreamSpec
    arrival: int = 0
    uid: int | None = None


@dataclass(frozen=True)
class Scenario:
    physical: int
    threads: int = 2
    ports: int = DEFAULT_PORTS
    budget: int = 1_000_000
    seed: int = 0
    ddm: bool = True
    processes: tuple[ProcessSpec, ...] = ()
    demands: tuple[tuple[int, DemandRecord], ...] = ()
    actions: tuple[tuple[tuple[int, int], ActionId], ...] = ()
    profile: VictimProfile = field(default_factory=VictimProfile)
    window_size: int = 1
    windows: int | None = None  # None: sized from the longest victim key

    @property
    def topology(self) -> Topology:
        return Topology(self.physical, self.threads)

    def demand_map(self) -> DemandMap:
        return DemandMap(self.topology, dict(self.demands))

    def action_map(self) -> ActionMap:
        return build_default_action_map().with_overrides(dict(self.actions))

    def victim_bits(self) -> int:
        return max((len(p.stream.bits) for p in self.processes if p.stream.kind == "victim"), default=1)

    def spy_windows(self) -> int:
        if self.windows is not None:
            return self.windows
        return spy_windows_for(self.victim_bits(), self.profile, self.window_size)

    def build_processes(self) -> list[Process]:
        out = []
        for spec in self.processes:
            s = spec.stream
            window = None
            if s.kind == "ops":
                stream = s.ops
            elif s.kind == "victim":
                stream = gen_victim(SecretKey.from_str(s.bits), self.profile)
            elif s.kind == "spy":
                plan = gen_spy(s.port, self.spy_windows(), self.window_size)
                stream, window = plan.stream, plan.window_size
            else:
                rng = random.Random(f"{self.seed}:{spec.pid}")
                stream = tuple(rng.randrange(self.ports) for _ in range(s.count))
            out.append(Process(spec.pid, spec.arrival, spec.core, tuple(stream), spec.uid, window))
        return out

    def sim_kwargs(self, *, ddm: bool | None = None, offline: Iterable[int] = (), processes=None) -> dict:
        return dict(
            topology=self.topology,
            processes=self.build_processes() if processes is None else processes,
            port_count=self.ports,
            demand_map=self.demand_map(),
            action_map=self.action_map(),
            cycle_budget=self.budget,
            ddm=self.ddm if ddm is None else ddm,
            offline=offline,
        )

    def with_key(self, key: SecretKey) -> "Scenario":
        """Replace every victim's key (spy window count is re-derived if automatic)."""
        procs = tuple(
            replace(p, stream=StreamSpec("victim", bits=str(key))) if p.stream.kind == "victim" else p
            for p in self.processes
        )
        return replace(self, processes=procs)

    def without_demands(self) -> "Scenario":
        return replace(self, demands=())

    def process(self, pid: str) -> ProcessSpec:
        for p in self.processes:
            if p.pid == pid:
                return p
        raise KeyError(pid)


_PROFILE_KEYS = {
    "attack.double_ops": "double_ops",
    "attack.add_ops": "add_ops",
    "attack.double_port": "double_port",
    "attack.add_port": "add_port",
}


def _int(text: str, what: str, lo: int | None = None, hi: int | None = None) -> int:
    try:
        v = int(text.strip(), 0)
    except ValueError:
        raise ValueError(f"{what} must be an integer, got {text.strip()!r}") from None
    if lo is not None and v < lo:
        raise ValueError(f"{what} must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ValueError(f"{what} must be <= {hi}, got {v}")
    return v


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate a scenario. Every problem is reported, each with its line."""
    errors: list[str] = []
    top: dict[str, int] = {}
    sim: dict[str, object] = {}
    prof: dict[str, int] = {}
    procs: dict[str, dict] = {}
    proc_lines: dict[str, int] = {}
    demands: dict[int, tuple[DemandRecord, int]] = {}
    actions: dict[tuple[int, int], ActionId] = {}
    seen: dict[str, int] = {}

    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or not key:
            errors.append(f"line {n}: expected 'section.key = value', got {raw.strip()!r}")
            continue
        if key in seen:
            errors.append(f"line {n}: duplicate key {key!r} (first set on line {seen[key]})")
            continue
        seen[key] = n
        parts = key.split(".")
        try:
            if key in ("topology.physical", "topology.threads"):
                top[parts[1]] = (_int(value, key, lo=1), n)
            elif key == "sim.ports":
                sim["ports"] = _int(value, key, lo=1)
            elif key == "sim.budget":
                sim["budget"] = _int(value, key, lo=1)
            elif key == "sim.seed":
                sim["seed"] = _int(value, key)
            elif key == "sim.ddm":
                v = value.strip().lower()
                if v not in ("on", "off"):
                    raise ValueError("sim.ddm must be 'on' or 'off'")
                sim["ddm"] = v == "on"
            elif key in _PROFILE_KEYS:
                prof[_PROFILE_KEYS[key]] = _int(value, key, lo=0)
            elif key == "attack.window_size":
                sim["window_size"] = _int(value, key, lo=1)
            elif key == "attack.windows":
                v = value.strip().lower()
                sim["windows"] = None if v == "auto" else _int(v, key, lo=1)
            elif parts[0] == "process" and len(parts) == 3:
                name, field_ = parts[1], parts[2]
                if not _NAME.match(name):
                    raise ValueError(f"bad process name {name!r}")
                entry = procs.setdefault(name, {})
                proc_lines.setdefault(name, n)
                if field_ == "core":
                    entry["core"] = (_int(value, key, lo=0), n)
                elif field_ == "arrival":
                    entry["arrival"] = _int(value, key, lo=0)
                elif field_ == "uid":
                    entry["uid"] = _int(value, key, lo=0, hi=0xFFFF_FFFF)
                elif field_ == "stream":
                    entry["stream"] = (StreamSpec.parse(value), n)
                else:
                    raise ValueError(f"unknown key {key!r}")
            elif parts[0] == "demand" and len(parts) == 2:
                core = _int(parts[1], "demand core", lo=0)
                fields = [f.strip() for f in value.split(",")]
                if len(fields) != 3:
                    raise ValueError("demand must be 'pid, sd, pd'")
                pid = _int(fields[0], "demand pid", lo=0, hi=0xFFFF_FFFF)
                sd = _int(fields[1], "sd", lo=0, hi=3)
                pd = _int(fields[2], "pd", lo=0, hi=3)
                demands[core] = (DemandRecord(pid, sd, pd), n)
            elif parts[0] == "action" and len(parts) == 3:
                sd = _int(parts[1], "action sd", lo=0, hi=3)
                pd = _int(parts[2], "action pd", lo=0, hi=3)
                actions[(sd, pd)] = ActionId.parse(value)
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, InvalidDemandError) as exc:
            errors.append(f"line {n}: {exc}")

    if "physical" not in top:
        errors.insert(0, "missing topology (topology.physical)")
        raise ScenarioError(errors)

    physical = top["physical"][0]
    threads = top.get("threads", (2, 0))[0]
    logical = physical * threads
    ports = sim.get("ports", DEFAULT_PORTS)
    try:
        profile = VictimProfile(**prof)
    except ValueError as exc:
        errors.append(f"attack profile: {exc}")
        profile = VictimProfile()

    specs = []
    for name, entry in procs.items():
        line0 = proc_lines[name]
        if "core" not in entry:
            errors.append(f"line {line0}: process {name} has no core")
        if "stream" not in entry:
            errors.append(f"line {line0}: process {name} has no stream")
        if "core" not in entry or "stream" not in entry:
            continue
        core, cline = entry["core"]
        if core >= logical:
            errors.append(f"line {cline}: process {name} targets core {core}, topology has 0..{logical - 1}")
        stream, sline = entry["stream"]
        bad = sorted(p for p in stream.ports_used(profile) if not 0 <= p < ports)
        if bad:
            errors.append(f"line {sline}: process {name} uses ports {bad}, sim.ports is {ports}")
        specs.append(ProcessSpec(name, core, stream, entry.get("arrival", 0), entry.get("uid")))

    for core, (_, line) in demands.items():
        if core >= logical:
            errors.append(f"line {line}: demand on core {core}, topology has 0..{logical - 1}")

    if errors:
        raise ScenarioError(errors)

    return Scenario(
        physical=physical,
        threads=threads,
        ports=ports,
        budget=sim.get("budget", 1_000_000),
        seed=sim.get("seed", 0),
        ddm=sim.get("ddm", True),
        processes=tuple(specs),
        demands=tuple(sorted((c, rec) for c, (rec, _) in demands.items())),
        actions=tuple(sorted(actions.items())),
        profile=profile,
        window_size=sim.get("window_size", 1),
        windows=sim.get("windows"),
    )


def format_scenario(s: Scenario) -> str:
    lines = [
        f"topology.physical = {s.physical}",
        f"topology.threads = {s.threads}",
        f"sim.ports = {s.ports}",
        f"sim.budget = {s.budget}",
        f"sim.seed = {s.seed}",
        f"sim.ddm = {'on' if s.ddm else 'off'}",
        f"attack.double_ops = {s.profile.double_ops}",
        f"attack.add_ops = {s.profile.add_ops}",
        f"attack.double_port = {s.profile.double_port}",
        f"attack.add_port = {s.profile.add_port}",
        f"attack.window_size = {s.window_size}",
        f"attack.windows = {'auto' if s.windows is None else s.windows}",
    ]
    for p in s.processes:
        lines.append(f"process.{p.pid}.arrival = {p.arrival}")
        lines.append(f"process.{p.pid}.core = {p.core}")
        if p.uid is not None:
            lines.append(f"process.{p.pid}.uid = {p.uid}")
        lines.append(f"process.{p.pid}.stream = {p.stream}")
    for core, rec in s.demands:
        lines.append(f"demand.{core} = {rec.user_pid}, {rec.sd}, {rec.pd}")
    for (sd, pd), action in s.actions:
        lines.append(f"action.{sd}.{pd} = {action.name}")
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
