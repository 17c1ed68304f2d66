import math

import pytest
import sympy
from hypothesis import given, strategies as st

from ddmsim.errors import InvalidCoreError, InvalidDemandError
from ddmsim.policy import build_default_action_map, compute_cd, protection_scope, select_action
from ddmsim.registers import ActionId
from ddmsim.topology import Topology

levels = st.integers(0, 3)


def oracle_action(sd, pd):
    # exact symbolic comparison against the band edges
    cd = sympy.sqrt(sd**2 + pd**2)
    if cd < sympy.sqrt(2):
        return ActionId.A00
    if cd > 2 * sympy.sqrt(2):
        return ActionId.A10
    return ActionId.A01


@pytest.mark.parametrize(
    "sd, pd, cd", [(1, 1, 1.41421356237), (0, 0, 0.0), (3, 3, 4.24264068712)]
)
def test_compute_cd(sd, pd, cd):
    assert compute_cd(sd, pd).cd == pytest.approx(cd, abs=1e-10)


def test_compute_cd_range_check():
    with pytest.raises(InvalidDemandError):
        compute_cd(4, 0)


@pytest.mark.parametrize(
    "cd, action",
    [
        (0.0, ActionId.A00),
        (math.sqrt(2), ActionId.A01),
        (1.41421356, ActionId.A00),  # just under sqrt(2)
        (2 * math.sqrt(2), ActionId.A01),
        (math.sqrt(8), ActionId.A01),
        (4.24264068, ActionId.A10),
        (3.0, ActionId.A10),
    ],
)
def test_select_action_on_floats(cd, action):
    assert select_action(cd) is action


def test_select_action_rejects_negative():
    with pytest.raises(InvalidDemandError):
        select_action(-1.0)


@pytest.mark.parametrize("sd", range(4))
@pytest.mark.parametrize("pd", range(4))
def test_default_map_matches_symbolic_oracle(sd, pd):
    assert build_default_action_map()[(sd, pd)] is oracle_action(sd, pd)


@pytest.mark.parametrize(
    "sd, pd, action",
    [(0, 1, ActionId.A00), (1, 1, ActionId.A01), (2, 2, ActionId.A01), (0, 3, ActionId.A10)],
)
def test_default_map_examples(sd, pd, action):
    assert build_default_action_map()[(sd, pd)] is action


@given(levels, levels)
def test_cd_symmetric(a, b):
    assert compute_cd(a, b) == compute_cd(b, a)


@given(levels, levels, levels)
def test_monotone_in_each_argument(fixed, lo, hi):
    lo, hi = sorted((lo, hi))
    assert select_action(compute_cd(lo, fixed)) <= select_action(compute_cd(hi, fixed))
    assert select_action(compute_cd(fixed, lo)) <= select_action(compute_cd(fixed, hi))


@given(st.floats(0, 10, allow_nan=False))
def test_step_function_has_two_edges(cd):
    action = select_action(cd)
    if cd < math.sqrt(2) - 1e-9:
        assert action is ActionId.A00
    elif math.sqrt(2) + 1e-9 < cd < 2 * math.sqrt(2) - 1e-9:
        assert action is ActionId.A01
    elif cd > 2 * math.sqrt(2) + 1e-9:
        assert action is ActionId.A10


@pytest.mark.parametrize(
    "action, halt",
    [
        (ActionId.A00, set()),
        (ActionId.A01, {1}),
        (ActionId.A10, {1, 2, 3, 4, 5, 6, 7}),
    ],
)
def test_protection_scope_examples(action, halt):
    scope = protection_scope(action, 0, Topology(4, 2))
    assert scope.halt_set == halt
    assert scope.protected_core == 0


def test_protection_scope_invalid_core():
    with pytest.raises(InvalidCoreError):
        protection_scope(ActionId.A01, 8, Topology(4, 2))


def test_no_smt_makes_a01_a_noop():
    assert protection_scope(ActionId.A01, 2, Topology(4, 1)).halt_set == set()


@given(st.integers(1, 6), st.integers(1, 4), st.data())
def test_scopes_nest(phys, threads, data):
    topo = Topology(phys, threads)
    lc = data.draw(st.integers(0, topo.logical_count - 1))
    sets = [protection_scope(a, lc, topo).halt_set for a in ActionId]
    assert sets[0] <= sets[1] <= sets[2]
    assert all(lc not in s for s in sets)
