import json
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftlab.bounds import (
    UNBOUNDED,
    compare_algorithms,
    drift_function,
    is_unbounded,
    lower_time_bound,
    time_bound,
    typed_bounds,
    upper_time_bound,
    verify_drift_inequality,
)
from driftlab.chain import StateChain, build_level_partition, level_stats
from driftlab.coeffs import CoefficientTable, coefficient_table, random_init_coeffs, type_c_coeff, type_cl_coeffs
from driftlab.oracle import mean_hitting_time
from driftlab.random_chains import random_elitist_chain

seeds = st.integers(0, 10**6)


def stats_of(chain):
    return level_stats(chain, build_level_partition(chain))


@pytest.fixture
def t1_stats(t1):
    return stats_of(t1)


def test_t1_lower_bound_is_exact(t1_stats):
    rep = lower_time_bound(t1_stats, coefficient_table(t1_stats, "forward", "lower"), 2)
    assert rep.value == 4
    assert [(t.ell, t.contribution) for t in rep.terms] == [(2, F(5, 2)), (1, F(3, 2))]


def test_t1_upper_bound_is_exact(t1_stats):
    assert upper_time_bound(t1_stats, coefficient_table(t1_stats, "forward", "upper"), 2).value == 4


def test_first_level_bound_is_one_term(t1_stats):
    rep = lower_time_bound(t1_stats, coefficient_table(t1_stats, "forward", "lower"), 1)
    assert len(rep.terms) == 1
    assert rep.value == 1 / t1_stats.climb_max(1) == 2


def test_direction_mismatch_and_range(t1_stats):
    up = coefficient_table(t1_stats, "forward", "upper")
    with pytest.raises(ValueError):
        lower_time_bound(t1_stats, up, 2)
    with pytest.raises(ValueError):
        upper_time_bound(t1_stats, up, 3)


def stuck_chain():
    """Level 2 holds a state that can only move to its level mate."""
    rows = {
        "c2": {"c1": F(1)},
        "c1": {"c1": F(1, 2), "b": F(1, 4), "a": F(1, 4)},
        "b": {"b": F(1, 2), "a": F(1, 2)},
        "a": {"a": F(1)},
    }
    return StateChain.build(rows, {"c2": F(0), "c1": F(0), "b": F(1), "a": F(2)})


def test_upper_bound_unbounded_when_a_state_cannot_climb():
    chain = stuck_chain()
    s = stats_of(chain)
    assert s.climb_min(2) == 0
    rep = upper_time_bound(s, coefficient_table(s, "forward", "upper"), 2)
    assert rep.unbounded and is_unbounded(rep.value)
    assert rep.to_json()["value"] == "unbounded"
    lo = lower_time_bound(s, coefficient_table(s, "forward", "lower"), 2)
    assert lo.value <= mean_hitting_time(chain)["c2"]


def test_drift_check_skips_unbounded_states():
    chain = stuck_chain()
    s = stats_of(chain)
    chk = verify_drift_inequality(chain, s, coefficient_table(s, "forward", "upper"))
    assert set(chk.skipped) == {"c1", "c2"}
    assert chk.ok


def test_typed_bounds_t1(t1_stats):
    s = t1_stats
    assert typed_bounds(s, type_c_coeff(s), start=2).value == 4
    assert typed_bounds(s, type_cl_coeffs(s), start=2).value == 4
    cl = random_init_coeffs(s, {2: F(1)})
    assert typed_bounds(s, cl, init={2: F(1)}, form="dk").value == 4


def test_typed_bounds_zero_prefix_is_weaker(t1_stats):
    cl = random_init_coeffs(t1_stats, {2: F(1)}, empty_prefix="zero")
    assert typed_bounds(t1_stats, cl, init={2: F(1)}, form="dk").value == F(5, 2)


def test_typed_bounds_one_level_chain():
    chain = StateChain.build({"b": {"b": F(2, 3), "a": F(1, 3)}, "a": {"a": F(1)}}, {"b": F(0), "a": F(1)})
    s = stats_of(chain)
    assert typed_bounds(s, F(1, 2), start=1).value == 3
    assert typed_bounds(s, {}, init={1: F(1)}, form="dk").value == 3


def test_typed_bounds_argument_errors(t1_stats):
    with pytest.raises(ValueError):
        typed_bounds(t1_stats, F(1, 2))
    with pytest.raises(ValueError):
        typed_bounds(t1_stats, F(1, 2), start=2, init={2: F(1)})
    with pytest.raises(ValueError):
        typed_bounds(t1_stats, F(1, 2), start=2, form="other")


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_typed_bound_ordering(seed):
    chain = random_elitist_chain(seed)
    s = stats_of(chain)
    m = mean_hitting_time(chain)
    c, cl = type_c_coeff(s), type_cl_coeffs(s)
    ckl = coefficient_table(s, "forward", "lower")
    for k in range(1, s.K + 1):
        b_c = typed_bounds(s, c, start=k).value
        b_cl = typed_bounds(s, cl, start=k).value
        b_ckl = time_bound(s, ckl, k).value
        assert b_c <= b_cl <= b_ckl <= min(m[x] for x in s.states(k))


@settings(max_examples=40, deadline=None)
@given(seeds, st.data())
def test_random_start_bound_is_sound(seed, data):
    chain = random_elitist_chain(seed)
    s = stats_of(chain)
    m = mean_hitting_time(chain)
    weights = data.draw(st.lists(st.integers(0, 4), min_size=s.K + 1, max_size=s.K + 1).filter(any))
    total = sum(weights)
    init = {k: F(w, total) for k, w in enumerate(weights)}
    expected = sum(init[k] * min(m[x] for x in s.states(k)) for k in range(s.K + 1))
    for prefix in ("vacuous", "zero"):
        cl = random_init_coeffs(s, init, prefix)
        assert typed_bounds(s, cl, init=init, form="dk").value <= expected


def test_t1_drift_is_one(t1, t1_stats):
    chk = verify_drift_inequality(t1, t1_stats, coefficient_table(t1_stats, "forward", "lower"))
    assert chk.drifts["s2"] == 1 and chk.drifts["s1"] == 1
    assert chk.ok


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_trivial_tables_pass_drift_check(seed):
    chain = random_elitist_chain(seed)
    s = stats_of(chain)
    assert verify_drift_inequality(chain, s, CoefficientTable("lower", "zeros", s.K, s.mode, {})).ok
    assert verify_drift_inequality(chain, s, CoefficientTable("upper", "ones", s.K, s.mode, {})).ok


def test_drift_check_flags_oversized_lower_table(t1, t1_stats):
    big = CoefficientTable("lower", "too big", 2, "rational", {(2, 1): F(1)})
    chk = verify_drift_inequality(t1, t1_stats, big)
    assert not chk.ok and chk.violations[0].state == "s2"


def test_drift_function_is_zero_on_optimum(t1_stats):
    d = drift_function(t1_stats, coefficient_table(t1_stats, "forward", "lower"))
    assert d == {"s0": 0, "s1": 2, "s2": 4}


def test_compare_identical_reports_contains_one(t1_stats):
    lo = lower_time_bound(t1_stats, coefficient_table(t1_stats, "type_c", "lower"), 2)
    up = upper_time_bound(t1_stats, coefficient_table(t1_stats, "type_c", "upper"), 2)
    cmp = compare_algorithms(lo, up, lo, up, 4, 4)
    assert cmp.contains(1) and cmp.exact == 1


def test_compare_interval_endpoints():
    cmp = compare_algorithms(F(2), F(6), F(1), F(4))
    assert (cmp.low, cmp.high) == (F(1, 2), F(6))
    assert cmp.exact is None


def test_compare_degenerate_inputs():
    cmp = compare_algorithms(F(2), UNBOUNDED, F(0), UNBOUNDED)
    assert cmp.low == 0 and cmp.high is UNBOUNDED
    assert compare_algorithms(F(1), F(2), F(0), F(3)).high is UNBOUNDED
    assert json.loads(json.dumps(cmp.to_json()))["ratio_high"] == "unbounded"


def test_report_serialization(t1_stats):
    rep = lower_time_bound(t1_stats, coefficient_table(t1_stats, "forward", "lower"), 2)
    data = rep.to_json()
    assert data["value"] == "4"
    assert data["terms"][0] == {"ell": 2, "coefficient": "1", "climb": "2/5", "contribution": "5/2"}
    assert rep.to_csv().splitlines()[1] == "lower,2,1,2/5,5/2"


def test_unbounded_sentinel_orders_above_numbers():
    assert UNBOUNDED > 10**9 and not UNBOUNDED < 5 and UNBOUNDED >= UNBOUNDED
    assert str(UNBOUNDED) == "unbounded"


def test_stuck_state_tables_stay_sound():
    chain = stuck_chain()
    part = build_level_partition(chain)
    s = level_stats(chain, part)
    assert s.stuck == {"c2"}
    from driftlab.oracle import h_extrema, hitting_profiles

    hx = h_extrema(hitting_profiles(chain, part), part)
    for method in ("forward", "reverse", "allpath", "path", "type_c", "type_cl"):
        lo = coefficient_table(s, method, "lower")
        up = coefficient_table(s, method, "upper")
        for k, ell, v in lo.free_entries():
            assert v <= hx[(k, ell)][0]
            assert up.get(k, ell) >= hx[(k, ell)][1]
        assert verify_drift_inequality(chain, s, lo).ok


def test_conditional_drift_undefined_for_stuck_state():
    from driftlab.coeffs import conditional_drift
    from driftlab.errors import ConvergenceError

    s = stats_of(stuck_chain())
    with pytest.raises(ConvergenceError):
        conditional_drift(s, coefficient_table(s, "forward", "lower"), "c2", 1)
