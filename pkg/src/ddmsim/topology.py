"""Physical/logical core layout.

Logical cores are paired contiguously: logical core ``i`` lives on physical
core ``i // threads_per_core``, so cores 0 and 1 share physical core 0 on a
two-way SMT part.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InvalidCoreError


@dataclass(frozen=True)
class Topology:
    physical_count: int
    threads_per_core: int = 2

    def __post_init__(self):
        if self.physical_count < 1:
            raise ValueError(f"physical_count must be >= 1, got {self.physical_count}")
        if self.threads_per_core < 1:
            raise ValueError(f"threads_per_core must be >= 1, got {self.threads_per_core}")

    @property
    def logical_count(self) -> int:
        return self.physical_count * self.threads_per_core

    @property
    def logical_cores(self) -> range:
        return range(self.logical_count)

    def check(self, lc: int) -> int:
        if not isinstance(lc, int) or isinstance(lc, bool) or not 0 <= lc < self.logical_count:
            raise InvalidCoreError(
                f"logical core {lc!r} out of range 0..{self.logical_count - 1}"
            )
        return lc

    def physical_of(self, lc: int) -> int:
        return self.check(lc) // self.threads_per_core

    def members(self, phys: int) -> frozenset[int]:
        """Logical cores belonging to physical core ``phys``."""
        if not 0 <= phys < self.physical_count:
            raise InvalidCoreError(f"physical core {phys!r} out of range")
        base = phys * self.threads_per_core
        return frozenset(range(base, base + self.threads_per_core))

    def hlc_of(self, lc: int) -> frozenset[int]:
        """Sibling logical cores of ``lc`` (same physical core, excluding ``lc``)."""
        return self.members(self.physical_of(lc)) - {lc}

    def thread_index(self, lc: int) -> int:
        return self.check(lc) % self.threads_per_core

    def primary_thread(self, lc: int) -> int:
        """First logical core of ``lc``'s physical core."""
        return self.physical_of(lc) * self.threads_per_core
