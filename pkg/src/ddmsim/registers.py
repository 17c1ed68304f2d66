"""Demand and action maps held in 64-bit model-specific register images.

Register layout of a demand word::

    63            36 35  34 33  32 31                     0
    +---------------+------+------+------------------------+
    |   reserved 0  |  SD  |  PD  |     user process id    |
    +---------------+------+------+------------------------+
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .errors import InvalidDemandError, MalformedRegisterError
from .topology import Topology

SD_SHIFT = 34
PD_SHIFT = 32
FIELD_MASK = 0b11
PID_MASK = 0xFFFF_FFFF
RESERVED_MASK = ~((1 << 36) - 1) & 0xFFFF_FFFF_FFFF_FFFF
WORD_MASK = 0xFFFF_FFFF_FFFF_FFFF

DEMAND_LEVELS = range(4)


class ActionId(enum.IntEnum):
    A00 = 0b00  # no protection
    A01 = 0b01  # halt the siblings of the protected core
    A10 = 0b10  # halt every other logical core

    @property
    def code(self) -> str:
        return format(self.value, "02b")

    @classmethod
    def parse(cls, text: str) -> "ActionId":
        t = text.strip().upper()
        if not t.startswith("A"):
            t = "A" + t
        try:
            return cls[t]
        except KeyError:
            raise InvalidDemandError(f"unknown action {text!r} (expected A00, A01 or A10)") from None


def check_level(name: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value not in DEMAND_LEVELS:
        raise InvalidDemandError(f"{name} must be an integer in [0, 3], got {value!r}")


@dataclass(frozen=True)
class DemandRecord:
    user_pid: int
    sd: int
    pd: int

    def __post_init__(self):
        check_level("sd", self.sd)
        check_level("pd", self.pd)
        if not isinstance(self.user_pid, int) or not 0 <= self.user_pid <= PID_MASK:
            raise InvalidDemandError(f"user_pid must fit in 32 bits, got {self.user_pid!r}")


@dataclass(frozen=True)
class MsrWord:
    raw: int

    def __post_init__(self):
        if not 0 <= self.raw <= WORD_MASK:
            raise MalformedRegisterError(f"register image {self.raw!r} is not a 64-bit value")

    def hex(self) -> str:
        return f"{self.raw:016X}"

    def __str__(self) -> str:
        return "0x" + self.hex()


def encode_demand(rec: DemandRecord) -> MsrWord:
    # DemandRecord validates itself, but callers may bypass __init__ via replace()
    check_level("sd", rec.sd)
    check_level("pd", rec.pd)
    return MsrWord((rec.sd << SD_SHIFT) | (rec.pd << PD_SHIFT) | (rec.user_pid & PID_MASK))


def decode_demand(word: MsrWord | int) -> DemandRecord:
    raw = word.raw if isinstance(word, MsrWord) else word
    if raw < 0 or raw > WORD_MASK:
        raise MalformedRegisterError(f"register image {raw!r} is not a 64-bit value")
    if raw & RESERVED_MASK:
        raise MalformedRegisterError(f"reserved bits 63..36 set in 0x{raw:016X}")
    return DemandRecord(
        user_pid=raw & PID_MASK,
        sd=(raw >> SD_SHIFT) & FIELD_MASK,
        pd=(raw >> PD_SHIFT) & FIELD_MASK,
    )


@dataclass(frozen=True)
class ActionMap:
    """Total map from every (sd, pd) pair to an action."""

    table: Mapping[tuple[int, int], ActionId]

    def __post_init__(self):
        missing = [(s, p) for s in DEMAND_LEVELS for p in DEMAND_LEVELS if (s, p) not in self.table]
        if missing:
            raise InvalidDemandError(f"action map is missing entries for {missing}")
        extra = set(self.table) - {(s, p) for s in DEMAND_LEVELS for p in DEMAND_LEVELS}
        if extra:
            raise InvalidDemandError(f"action map has out-of-range keys {sorted(extra)}")
        object.__setattr__(
            self, "table", {k: ActionId(self.table[k]) for k in sorted(self.table)}
        )

    def __getitem__(self, key: tuple[int, int]) -> ActionId:
        return self.table[key]

    def with_overrides(self, overrides: Mapping[tuple[int, int], ActionId]) -> "ActionMap":
        for sd, pd in overrides:
            check_level("sd", sd)
            check_level("pd", pd)
        merged = dict(self.table)
        merged.update(overrides)
        return ActionMap(merged)

    def register_images(self) -> dict[tuple[int, int], MsrWord]:
        """One register per demand combination, holding the 2-bit action code."""
        return {k: MsrWord(int(v)) for k, v in self.table.items()}


def lookup_action(am: ActionMap, rec: DemandRecord) -> ActionId:
    return am.table[(rec.sd, rec.pd)]


@dataclass
class DemandMap:
    topology: Topology
    entries: dict[int, DemandRecord] = field(default_factory=dict)

    def __post_init__(self):
        for lc in self.entries:
            self.topology.check(lc)

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, lc: int) -> DemandRecord | None:
        return self.entries.get(lc)

    def register_images(self) -> dict[int, MsrWord]:
        return {lc: encode_demand(self.entries[lc]) for lc in sorted(self.entries)}


def register_demand(dm: DemandMap, lc: int, rec: DemandRecord) -> DemandMap:
    """Write ``rec`` into ``lc``'s demand register; a later write replaces an earlier one."""
    dm.topology.check(lc)
    dm.entries[lc] = rec
    return dm
