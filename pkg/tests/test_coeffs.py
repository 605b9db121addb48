from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftlab.chain import Path, StateChain, build_level_graph, build_level_partition, level_stats
from driftlab.coeffs import (
    CoefficientTable,
    allpath_coeffs,
    coefficient_table,
    coeffs_reverse,
    conditional_drift,
    default_paths,
    dominance_check,
    drift_violations,
    lower_coeffs_forward,
    path_lower_coeffs,
    path_table,
    path_upper_coeffs,
    random_init_coeffs,
    read_table_csv,
    type_c_coeff,
    type_cl_coeffs,
    upper_coeffs_forward,
)
from driftlab.errors import GuardError, PathError
from driftlab.knapsack import build_lumped_chain, make_instance
from driftlab.bounds import time_bound, verify_drift_inequality
from driftlab.oracle import h_extrema, hitting_profiles, mean_hitting_time
from driftlab.random_chains import random_elitist_chain

seeds = st.integers(0, 10**6)


@pytest.fixture
def t1_stats(t1):
    return level_stats(t1, build_level_partition(t1))


def stats_of(chain):
    return level_stats(chain, build_level_partition(chain))


def test_t1_every_family_gives_three_quarters(t1_stats):
    s = t1_stats
    assert lower_coeffs_forward(s, 1).get(2, 1) == F(3, 4)
    assert upper_coeffs_forward(s, 1).get(2, 1) == F(3, 4)
    row = coeffs_reverse(s, 2, 1, "lower")
    assert (row.get(2, 1), row.get(2, 0)) == (F(3, 4), 1)
    assert allpath_coeffs(s, 1).get(2, 1) == F(3, 4)
    assert path_lower_coeffs(s, Path((2, 1))).get(2, 1) == F(3, 4)
    assert path_upper_coeffs(s, Path((2, 1))).get(2, 1) == F(3, 4)
    assert type_c_coeff(s) == F(3, 4)
    assert type_cl_coeffs(s) == {1: F(3, 4)}


def test_fixed_entries(t1_stats):
    tab = coefficient_table(t1_stats, "forward", "lower")
    assert tab.get(1, 1) == tab.get(2, 2) == 1
    assert tab.get(2, 0) == 1
    assert tab.get(1, 2) == 0


def test_default_entries_by_direction():
    lo = CoefficientTable("lower", "x", 3, "rational", {})
    up = CoefficientTable("upper", "x", 3, "rational", {})
    assert lo.get(3, 1) == 0 and up.get(3, 1) == 1


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_single_feeding_level_terms(seed):
    s = stats_of(random_elitist_chain(seed))
    for ell in range(1, s.K):
        assert lower_coeffs_forward(s, ell, ell + 1).get(ell + 1, ell) == s.r_min(ell + 1, ell)
        assert upper_coeffs_forward(s, ell, ell + 1).get(ell + 1, ell) == min(s.r_max(ell + 1, ell), 1)
        assert coeffs_reverse(s, ell + 1, ell).get(ell + 1, ell) == s.r_min(ell + 1, ell)
        assert allpath_coeffs(s, ell, ell + 1).get(ell + 1, ell) == s.r_min(ell + 1, ell)


def test_pair_range_checked(t1_stats):
    with pytest.raises(ValueError):
        lower_coeffs_forward(t1_stats, 0)
    with pytest.raises(ValueError):
        coeffs_reverse(t1_stats, 3)
    with pytest.raises(ValueError):
        coeffs_reverse(t1_stats, 2, 1, "sideways")


def test_allpath_guard():
    s = stats_of(random_elitist_chain(3, max_levels=15, min_levels=15, singleton=True))
    assert s.K == 15
    with pytest.raises(GuardError, match="use recursive form"):
        allpath_coeffs(s, 1)
    with pytest.raises(GuardError, match="use recursive form"):
        coefficient_table(s, "allpath")
    coefficient_table(s, "forward")


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_statewise_forward_at_least_as_tight(seed):
    s = stats_of(random_elitist_chain(seed))
    for direction in ("lower", "upper"):
        pw = coefficient_table(s, "forward", direction)
        lw = coefficient_table(s, "forward_levelwise", direction)
        rv = coefficient_table(s, "reverse", direction)
        for k, ell, v in pw.free_entries():
            if direction == "lower":
                assert v >= lw.get(k, ell)
            else:
                assert v <= lw.get(k, ell)
            assert lw.get(k, ell) == rv.get(k, ell)


def skip_chain():
    """Levels 0..3 where S_3 always jumps past S_2."""
    rows = {
        "d": {"d": F(1, 2), "b": F(1, 4), "a": F(1, 4)},
        "c": {"c": F(1, 2), "a": F(1, 2)},
        "b": {"b": F(1, 2), "a": F(1, 2)},
        "a": {"a": F(1)},
    }
    return StateChain.build(rows, {"d": F(0), "c": F(1), "b": F(2), "a": F(3)})


def test_path_skipping_a_level_assigns_trivial_values():
    s = stats_of(skip_chain())
    graph = build_level_graph(s)
    path = Path((3, 1))
    assert graph.has_arc(3, 1)
    lo = path_lower_coeffs(s, path, graph=graph)
    up = path_upper_coeffs(s, path, graph=graph)
    assert lo.get(3, 1) == F(1, 2) and lo.get(2, 1) == 0
    assert up.get(3, 1) == F(1, 2) and up.get(2, 1) == 1


def test_path_must_follow_graph_arcs():
    s = stats_of(skip_chain())
    with pytest.raises(PathError):
        path_lower_coeffs(s, Path((3, 2, 1)))
    with pytest.raises(PathError):
        path_upper_coeffs(s, Path((3, 0)))


def test_type_c_is_zero_for_a_level_skipped_from_above():
    s = stats_of(skip_chain())
    assert type_c_coeff(s) == 0
    assert type_cl_coeffs(s)[2] == 0


def test_type_c_needs_two_levels():
    chain = StateChain.build({"b": {"b": F(1, 2), "a": F(1, 2)}, "a": {"a": F(1)}}, {"b": F(0), "a": F(1)})
    s = stats_of(chain)
    with pytest.raises(ValueError):
        type_c_coeff(s)
    with pytest.raises(ValueError):
        type_cl_coeffs(s)
    assert dict(coefficient_table(s, "type_c").values) == {}


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_explicit_path_form_never_tighter_than_recursive(seed):
    chain = random_elitist_chain(seed)
    s = stats_of(chain)
    graph = build_level_graph(s)
    for ell in range(1, s.K):
        for p in graph.all_paths(s.K, ell):
            le, lr = (path_table(s, "lower", {ell: p}, rec) for rec in (False, True))
            ue, ur = (path_table(s, "upper", {ell: p}, rec) for rec in (False, True))
            for k, l2, v in le.free_entries():
                assert v <= lr.get(k, l2)
                assert ue.get(k, l2) >= ur.get(k, l2)


def test_kp2_descending_path_lower_coefficients_are_sound():
    n = 8
    chain = build_lumped_chain(make_instance("KP2", n), "feasibility")
    part = build_level_partition(chain)
    s = level_stats(chain, part)
    hx = h_extrema(hitting_profiles(chain, part), part)
    verts = tuple(part.level_of[f"(0,0;{i})"] for i in range(n // 2))
    path = Path(verts)
    for rec in (False, True):
        col = path_lower_coeffs(s, path, recursive=rec)
        for j in verts[:-1]:
            assert 0 < col.get(j, path.end) <= hx[(j, path.end)][0]


def test_kp2_upper_coefficient_into_local_optimum_is_sound():
    chain = build_lumped_chain(make_instance("KP2", 8), "feasibility")
    part = build_level_partition(chain)
    s = level_stats(chain, part)
    hx = h_extrema(hitting_profiles(chain, part), part)
    start, target = part.level_of["(0,0;0)"], part.level_of["(0,1;0)"]
    for p in build_level_graph(s).all_paths(start, target):
        col = path_upper_coeffs(s, p)
        assert col.get(start, target) >= hx[(start, target)][1]


def test_random_init_conventions(t1_stats):
    s = t1_stats
    assert random_init_coeffs(s, {2: F(1)}) == {1: F(3, 4), 2: 1}
    assert random_init_coeffs(s, {2: F(1)}, empty_prefix="zero") == {1: 0, 2: 1}
    assert random_init_coeffs(s, {1: F(1, 2), 2: F(1, 2)}) == {1: F(3, 4), 2: F(1, 2)}
    assert random_init_coeffs(s, {0: F(1, 2), 1: F(1, 4), 2: F(1, 4)}) == {1: F(1, 3), 2: F(1, 4)}


def test_random_init_refuses_bad_distributions(t1_stats):
    with pytest.raises(ValueError):
        random_init_coeffs(t1_stats, {2: F(1, 2)})
    with pytest.raises(ValueError):
        random_init_coeffs(t1_stats, {3: F(1)})
    with pytest.raises(ValueError):
        random_init_coeffs(t1_stats, {1: F(3, 2), 2: F(-1, 2)})
    with pytest.raises(ValueError):
        random_init_coeffs(t1_stats, {2: F(1)}, empty_prefix="one")
    with pytest.raises(ValueError):
        coefficient_table(t1_stats, "random_init", "upper", init={2: F(1)})


def test_conditional_drift_t1(t1_stats):
    s = t1_stats
    assert conditional_drift(s, coefficient_table(s, "forward", "lower"), "s2", 1) == 0


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_trivial_tables_have_signed_drift(seed):
    s = stats_of(random_elitist_chain(seed))
    zeros = CoefficientTable("lower", "zeros", s.K, s.mode, {})
    ones = CoefficientTable("upper", "ones", s.K, s.mode, {})
    for j in range(2, s.K + 1):
        for x in s.states(j):
            for ell in range(1, j):
                assert conditional_drift(s, zeros, x, ell) <= 0
                assert conditional_drift(s, ones, x, ell) >= 0
    assert drift_violations(s, zeros) == []
    assert drift_violations(s, ones) == []


def test_dominance_t1(t1_stats):
    s = t1_stats
    rep = dominance_check(coefficient_table(s, "type_cl", "lower"), coefficient_table(s, "forward", "lower"))
    assert rep.ok and rep.strict == ()


def test_dominance_harness_finds_strict_entries():
    strict = 0
    for seed in range(100):
        s = stats_of(random_elitist_chain(seed))
        for direction in ("lower", "upper"):
            rep = dominance_check(coefficient_table(s, "type_cl", direction), coefficient_table(s, "forward", direction))
            assert rep.ok
            strict += len(rep.strict)
    assert strict > 0


def test_dominance_flags_wrong_order(t1_stats):
    weak = CoefficientTable("lower", "w", 2, "rational", {(2, 1): F(1, 2)})
    strong = CoefficientTable("lower", "s", 2, "rational", {(2, 1): F(3, 4)})
    assert not dominance_check(strong, weak).ok
    assert dominance_check(weak, strong).strict[0].ckl == F(3, 4)


def test_csv_round_trip(t1_stats):
    tab = coefficient_table(t1_stats, "forward", "upper")
    text = tab.to_csv()
    assert text.splitlines()[0] == "k,ell,value,method,direction"
    back = read_table_csv(text)
    assert back.direction == "upper" and back.get(2, 1) == F(3, 4)


def test_default_paths_cover_every_column():
    s = stats_of(random_elitist_chain(7))
    paths = default_paths(s)
    for ell, p in paths.items():
        assert p.end == ell
        assert p.start == max(k for k in range(ell + 1, s.K + 1) if any(True for _ in build_level_graph(s).all_paths(k, ell)))


def test_unknown_method(t1_stats):
    with pytest.raises(ValueError):
        coefficient_table(t1_stats, "magic")


def with_stuck_state(chain):
    """Make the first state of the first multi-state level move only to its mates."""
    part = build_level_partition(chain)
    for lv in part.levels[1:]:
        if len(lv) > 1:
            x, mates = lv[0], lv[1:]
            rows = {s: dict(chain.rows[s]) for s in chain.states}
            rows[x] = {y: F(1, len(mates)) for y in mates}
            return StateChain.build(rows, chain.fitness), x
    return None, None


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_tables_sound_with_stuck_states(seed):
    chain, x = with_stuck_state(random_elitist_chain(seed))
    if chain is None:
        return
    part = build_level_partition(chain)
    s = level_stats(chain, part)
    assert x in s.stuck
    hx = h_extrema(hitting_profiles(chain, part), part)
    m = mean_hitting_time(chain)
    for method in ("forward", "forward_levelwise", "reverse", "allpath", "path", "path_recursive", "type_c", "type_cl"):
        for direction in ("lower", "upper"):
            tab = coefficient_table(s, method, direction)
            for k, ell, v in tab.free_entries():
                lo, hi = hx[(k, ell)]
                assert v <= lo if direction == "lower" else v >= hi
            assert drift_violations(s, tab) == []
            assert verify_drift_inequality(chain, s, tab).ok
            for k in range(1, s.K + 1):
                b = time_bound(s, tab, k).value
                for y in s.states(k):
                    assert b <= m[y] if direction == "lower" else b >= m[y]
