"""Combined-demand computation, action selection and protection scopes.

Thresholds are compared on the integer ``sd**2 + pd**2`` against 2 and 8 so the
band edges at sqrt(2) and 2*sqrt(2) are decided exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidDemandError
from .registers import DEMAND_LEVELS, ActionId, ActionMap, check_level
from .topology import Topology

LOW_BAND_SQ = 2   # cd < sqrt(2)   -> A00
HIGH_BAND_SQ = 8  # cd > 2*sqrt(2) -> A10


@dataclass(frozen=True)
class CombinedDemand:
    norm_sq: int

    @property
    def cd(self) -> float:
        return math.sqrt(self.norm_sq)

    def __float__(self) -> float:
        return self.cd


def compute_cd(sd: int, pd: int) -> CombinedDemand:
    check_level("sd", sd)
    check_level("pd", pd)
    return CombinedDemand(sd * sd + pd * pd)


def _norm_sq(cd: CombinedDemand | float) -> float:
    if isinstance(cd, CombinedDemand):
        return cd.norm_sq
    value = float(cd)
    if value < 0 or math.isnan(value):
        raise InvalidDemandError(f"combined demand must be >= 0, got {cd!r}")
    sq = value * value
    # snap float cd values that are really sqrt of an integer (e.g. 2*sqrt(2))
    if abs(sq - round(sq)) < 1e-9:
        return round(sq)
    return sq


def select_action(cd: CombinedDemand | float) -> ActionId:
    sq = _norm_sq(cd)
    if sq < LOW_BAND_SQ:
        return ActionId.A00
    if sq <= HIGH_BAND_SQ:
        return ActionId.A01
    return ActionId.A10


def build_default_action_map() -> ActionMap:
    return ActionMap(
        {(sd, pd): select_action(compute_cd(sd, pd)) for sd in DEMAND_LEVELS for pd in DEMAND_LEVELS}
    )


@dataclass(frozen=True)
class ProtectionScope:
    protected_core: int
    halt_set: frozenset[int]
    action: ActionId = ActionId.A00

    def __post_init__(self):
        if self.protected_core in self.halt_set:
            raise InvalidDemandError("protected core cannot be in its own halt set")


def protection_scope(action: ActionId, lc: int, topo: Topology) -> ProtectionScope:
    topo.check(lc)
    action = ActionId(action)
    if action is ActionId.A00:
        halt = frozenset()
    elif action is ActionId.A01:
        halt = topo.hlc_of(lc)
    else:
        halt = frozenset(topo.logical_cores) - {lc}
    return ProtectionScope(lc, halt, action)


def format_action_map(am: ActionMap) -> str:
    """4x4 grid, rows are sd and columns are pd."""
    lines = ["sd\\pd " + " ".join(f"{pd:>3}" for pd in DEMAND_LEVELS)]
    for sd in DEMAND_LEVELS:
        lines.append(f"{sd:>5} " + " ".join(am[(sd, pd)].name for pd in DEMAND_LEVELS))
    return "\n".join(lines)
