import random
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from ddmsim.attack import SpyTrace
from ddmsim.errors import ConfigError
from ddmsim.registers import DemandRecord
from ddmsim.report import (
    BenchConfig,
    BenchMode,
    SlowdownRow,
    emit_csv,
    format_table,
    mixed_workload,
    mode_cycles,
    rows_to_csv,
    run_bench,
    static_off_processes,
    trace_to_csv,
)
from ddmsim.scenario import ProcessSpec, Scenario, StreamSpec


def test_slowdown_formula():
    assert SlowdownRow("w", BenchMode.DDM, 200, 230).slowdown == pytest.approx(0.15)
    assert SlowdownRow("w", BenchMode.DDM, 0, 0).slowdown == 0.0


def test_mode_parse():
    assert BenchMode.parse("static-off") is BenchMode.STATIC_SMT_OFF
    assert BenchMode.parse("DDM") is BenchMode.DDM
    with pytest.raises(ConfigError):
        BenchMode.parse("smt-maybe")


def test_no_protected_process_means_zero_ddm_cost():
    rows = run_bench(BenchConfig("plain", mixed_workload(seed=4).without_demands(), repetitions=3))
    ddm = next(r for r in rows if r.mode is BenchMode.DDM)
    assert ddm.slowdown == 0.0


def test_static_off_can_be_faster_under_heavy_contention():
    # two siblings fighting over one port: serialising them loses nothing and
    # the single remaining thread never loses arbitration
    scn = Scenario(
        physical=1,
        ports=1,
        processes=(
            ProcessSpec("a", 0, StreamSpec("ops", ops=(0,) * 20)),
            ProcessSpec("b", 1, StreamSpec("ops", ops=(0,) * 20)),
        ),
    )
    rows = {r.mode: r for r in run_bench(BenchConfig("contend", scn))}
    assert rows[BenchMode.STATIC_SMT_OFF].slowdown <= 0
    assert rows[BenchMode.SMT_ON_BASELINE].slowdown == 0


def test_static_off_on_independent_ports_costs_time():
    scn = Scenario(
        physical=1,
        processes=(
            ProcessSpec("a", 0, StreamSpec("ops", ops=(0,) * 20)),
            ProcessSpec("b", 1, StreamSpec("ops", ops=(1,) * 20)),
        ),
    )
    assert mode_cycles(scn, BenchMode.SMT_ON_BASELINE) == 20
    assert mode_cycles(scn, BenchMode.STATIC_SMT_OFF) == 40


def test_static_off_moves_to_primary_thread():
    scn = mixed_workload()
    moved, offline = static_off_processes(scn, scn.build_processes())
    assert offline == {1, 3, 5, 7}
    assert {p.core for p in moved} == {0, 2, 4, 6}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_ddm_never_worse_than_static_off_with_sibling_scopes(seed, nprot):
    # one-sibling scopes on a fully loaded machine: each protected process idles
    # at most its sibling, while static-off idles half the machine all the time
    rng = random.Random(seed)
    procs, demands = [], []
    for lc in range(8):
        protected = lc % 2 == 0 and lc // 2 < nprot
        count = rng.randint(20, 60) if protected else rng.randint(200, 400)
        procs.append(ProcessSpec(f"p{lc}", lc, StreamSpec("random", count=count), rng.randint(0, 50), uid=lc + 1))
        if protected:
            demands.append((lc, DemandRecord(lc + 1, 1, 1)))
    scn = Scenario(physical=4, seed=seed, processes=tuple(procs), demands=tuple(demands))
    rows = {r.mode: r for r in run_bench(BenchConfig("rand", scn))}
    assert rows[BenchMode.DDM].slowdown <= rows[BenchMode.STATIC_SMT_OFF].slowdown


def test_mismatched_workloads_rejected():
    a = mixed_workload(seed=1)
    b = replace(a, processes=a.processes[:-1])
    with pytest.raises(ConfigError):
        run_bench(BenchConfig("x", {BenchMode.SMT_ON_BASELINE: a, BenchMode.DDM: b}, modes=(BenchMode.DDM,)))


def test_missing_workload_for_mode():
    with pytest.raises(ConfigError):
        run_bench(BenchConfig("x", {BenchMode.SMT_ON_BASELINE: mixed_workload()}, modes=(BenchMode.DDM,)))


def test_repetitions_must_be_positive():
    with pytest.raises(ConfigError):
        run_bench(BenchConfig("x", mixed_workload(), repetitions=0))


def test_repetitions_average_over_seeds():
    scn = mixed_workload(seed=7)
    rows = run_bench(BenchConfig("m", scn, modes=(BenchMode.SMT_ON_BASELINE,), repetitions=2))
    expect = (mode_cycles(scn, BenchMode.SMT_ON_BASELINE) + mode_cycles(replace(scn, seed=8), BenchMode.SMT_ON_BASELINE)) / 2
    assert rows[0].cycles_mode == expect


def test_csv_is_deterministic(tmp_path):
    cfg = BenchConfig("mixed", mixed_workload(seed=2), repetitions=2)
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_bench(cfg), first)
    emit_csv(run_bench(cfg), second)
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text().splitlines()
    assert lines[0] == "workload,mode,cycles,slowdown"
    assert [l.split(",")[1] for l in lines[1:]] == ["smt-on", "ddm", "static-off"]


def test_csv_format():
    rows = [SlowdownRow("w", BenchMode.DDM, 3, 4)]
    assert rows_to_csv(rows) == "workload,mode,cycles,slowdown\nw,ddm,4,0.333333\n"
    assert "0.3333" in format_table(rows)
    assert trace_to_csv(SpyTrace(((0, 1), (1, 3)), 1)) == "window,elapsed\n0,1\n1,3\n"


def test_unwritable_path_names_the_path(tmp_path):
    target = tmp_path / "missing-dir" / "out.csv"
    with pytest.raises(OSError) as exc:
        emit_csv([], target)
    assert str(target) in str(exc.value)
