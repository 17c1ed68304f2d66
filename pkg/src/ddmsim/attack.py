"""Port-contention attacker model: victim and spy streams, and trace analysis.

The victim is a left-to-right double-and-add loop. Each DOUBLE issues a burst
on one execution port, each ADD (only for 1-bits) a burst on another. A spy
on the sibling logical core hammers the ADD port and times fixed-size batches
of its own ops; ADD bursts show up as slow batches.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass
from typing import Sequence

from .errors import AnalysisError, InsufficientTraceError


@dataclass(frozen=True)
class SecretKey:
    bits: tuple[int, ...]

    def __post_init__(self):
        if not self.bits:
            raise ValueError("secret key must have at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"key bits must be 0/1, got {self.bits!r}")

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(map(str, self.bits))

    @classmethod
    def from_str(cls, text: str) -> "SecretKey":
        return cls(tuple(int(c) for c in text.strip()))

    @classmethod
    def from_hex(cls, text: str) -> "SecretKey":
        digits = text.strip().lower().removeprefix("0x")
        if not digits:
            raise ValueError("empty hex key")
        return cls(tuple(int(b) for b in format(int(digits, 16), f"0{4 * len(digits)}b")))

    @classmethod
    def random(cls, nbits: int, rng: random.Random) -> "SecretKey":
        return cls(tuple(rng.getrandbits(1) for _ in range(nbits)))

    def complement(self) -> "SecretKey":
        return SecretKey(tuple(1 - b for b in self.bits))


@dataclass(frozen=True)
class VictimProfile:
    double_ops: int = 8
    add_ops: int = 8
    double_port: int = 0
    add_port: int = 1

    def __post_init__(self):
        if self.double_ops < 1 or self.add_ops < 1:
            raise ValueError("double_ops and add_ops must be >= 1")
        if self.double_port == self.add_port:
            raise ValueError("DOUBLE and ADD must use different ports")


@dataclass(frozen=True)
class SpyTrace:
    windows: tuple[tuple[int, int], ...]
    window_size: int

    def __post_init__(self):
        for idx, elapsed in self.windows:
            if elapsed < self.window_size:
                raise AnalysisError(
                    f"window {idx} elapsed {elapsed} is faster than solo speed {self.window_size}"
                )

    @property
    def elapsed(self) -> list[int]:
        return [e for _, e in self.windows]

    def end_times(self, origin: int = 0) -> list[int]:
        """Cycle at which each window completed, relative to ``origin``."""
        out, t = [], origin
        for _, e in self.windows:
            t += e
            out.append(t)
        return out

    def restrict(self, start: int, stop: int, origin: int = 0) -> "SpyTrace":
        """Windows that completed inside the half-open cycle range [start, stop)."""
        kept = tuple(
            w for w, t in zip(self.windows, self.end_times(origin)) if start <= t < stop
        )
        return SpyTrace(kept, self.window_size)


def gen_victim(key: SecretKey | Sequence[int], profile: VictimProfile = VictimProfile()) -> tuple[int, ...]:
    bits = key.bits if isinstance(key, SecretKey) else tuple(key)
    if not bits:
        raise ValueError("cannot generate a victim stream for an empty key")
    stream: list[int] = []
    for b in bits:
        stream.extend([profile.double_port] * profile.double_ops)
        if b:
            stream.extend([profile.add_port] * profile.add_ops)
    return tuple(stream)


@dataclass(frozen=True)
class SpyPlan:
    stream: tuple[int, ...]
    window_size: int
    total_windows: int


def gen_spy(port: int, total_windows: int, window_size: int) -> SpyPlan:
    if total_windows < 1 or window_size < 1:
        raise ValueError("total_windows and window_size must be positive")
    return SpyPlan((port,) * (total_windows * window_size), window_size, total_windows)


def spy_windows_for(nbits: int, profile: VictimProfile, window_size: int) -> int:
    """Enough windows for the spy to outlive a victim of ``nbits`` bits.

    Depends only on the key length, never on key values, so spy streams are
    the same for every key of a given length.
    """
    worst_victim_cycles = nbits * (profile.double_ops + 2 * profile.add_ops)
    return math.ceil(worst_victim_cycles / window_size)


def _bursts(trace: SpyTrace, low: float, high: float) -> list[tuple[int, int]]:
    """Cycle spans of contended regions, found from slow-window runs."""
    mid = (low + high) / 2
    ends = trace.end_times()
    elapsed = trace.elapsed
    spans: list[tuple[int, int]] = []
    i, n = 0, len(elapsed)
    while i < n:
        if elapsed[i] <= mid:
            i += 1
            continue
        j = i
        while j + 1 < n and elapsed[j + 1] > mid:
            j += 1
        # a contended op costs ~2 cycles, so the slow part of an edge window is
        # about twice its excess over the fast plateau
        first_slow = min(elapsed[i], round(2 * (elapsed[i] - low)))
        last_slow = min(elapsed[j], round(2 * (elapsed[j] - low)))
        start = ends[i] - first_slow
        stop = ends[j] - elapsed[j] + last_slow
        spans.append((start, stop))
        i = j + 1
    return spans


def recover_secret(
    trace: SpyTrace, expected_bits: int, profile: VictimProfile = VictimProfile()
) -> tuple[int, ...]:
    """Threshold decoder for a spy trace that starts together with the victim.

    Slow windows (above the midpoint of the low and high plateaus) mark ADD
    bursts. The uncontended stretch before each burst is cut into DOUBLE-sized
    intervals; the last interval before a burst is a 1, the rest are 0. Bits
    after the final burst are taken as 0. A flat trace decodes to all zeros.
    """
    if expected_bits < 1 or len(trace.windows) < expected_bits:
        raise InsufficientTraceError(
            f"trace has {len(trace.windows)} windows, need at least {expected_bits}"
        )
    elapsed = trace.elapsed
    low, high = min(elapsed), max(elapsed)
    bits: list[int] = []
    if high > low:
        prev_stop = 0
        for start, stop in _bursts(trace, low, high):
            doubles = max(1, round((start - prev_stop) / profile.double_ops))
            bits.extend([0] * (doubles - 1))
            bits.append(1)
            prev_stop = stop
    bits = bits[:expected_bits]
    bits.extend([0] * (expected_bits - len(bits)))
    return tuple(bits)


@dataclass(frozen=True)
class LeakageReport:
    accuracy: float
    variance: float
    window_variance: float | None
    key_independent: bool | None
    bits: int
    windows: int

    def to_text(self) -> str:
        def fmt(v):
            if v is None:
                return "n/a"
            if isinstance(v, bool):
                return str(v).lower()
            if isinstance(v, float):
                return f"{v:.6g}"
            return str(v)

        rows = [
            ("bits", self.bits),
            ("windows", self.windows),
            ("accuracy", self.accuracy),
            ("trace_variance", self.variance),
            ("protected_window_variance", self.window_variance),
            ("key_independent", self.key_independent),
        ]
        return "\n".join(f"{k}={fmt(v)}" for k, v in rows)


def leakage_report(
    recovered: Sequence[int],
    truth: SecretKey,
    trace: SpyTrace,
    other_trace: SpyTrace | None = None,
    protection_window: tuple[int, int] | None = None,
    origin: int = 0,
) -> LeakageReport:
    """Summarise one attack run.

    ``other_trace`` is a trace captured against a different key of the same
    length; the key-independence flag is only defined when it is given.
    ``protection_window`` is a half-open cycle range; windows that completed in
    it contribute to ``window_variance``.
    """
    if len(recovered) != len(truth):
        raise AnalysisError(f"recovered {len(recovered)} bits but key has {len(truth)}")
    hits = sum(int(a == b) for a, b in zip(recovered, truth.bits))
    elapsed = trace.elapsed
    variance = statistics.pvariance(elapsed) if elapsed else 0.0
    window_variance = None
    if protection_window is not None:
        inside = trace.restrict(*protection_window, origin=origin).elapsed
        window_variance = statistics.pvariance(inside) if inside else 0.0
    independent = None if other_trace is None else trace.windows == other_trace.windows
    return LeakageReport(
        accuracy=hits / len(truth),
        variance=float(variance),
        window_variance=None if window_variance is None else float(window_variance),
        key_independent=independent,
        bits=len(truth),
        windows=len(trace.windows),
    )
