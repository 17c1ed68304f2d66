"""Simulator for demand-driven dynamic SMT mitigation against port-contention side channels."""

from .attack import SecretKey, SpyTrace, VictimProfile, gen_spy, gen_victim, leakage_report, recover_secret
from .engine import Event, EventKind, Process, SimResult, Simulator, run
from .policy import build_default_action_map, compute_cd, protection_scope, select_action
from .registers import ActionId, ActionMap, DemandMap, DemandRecord, MsrWord, decode_demand, encode_demand
from .scenario import Scenario, format_scenario, load_scenario, parse_scenario
from .topology import Topology

__version__ = "0.1.0"
