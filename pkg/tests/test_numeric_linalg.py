from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftlab.errors import SingularSystemError
from driftlab.linalg import bareiss_solve, float_solve, solve
from driftlab.numeric import FLOAT, RATIONAL, check_mode, format_number, is_close, parse_number, to_mode


def test_parse_number_rational_forms():
    assert parse_number("3/10", RATIONAL) == F(3, 10)
    assert parse_number(2, RATIONAL) == F(2)
    assert parse_number(" 7 ", RATIONAL) == F(7)


def test_parse_number_refuses_float_in_rational_mode():
    with pytest.raises(ValueError):
        parse_number(0.3, RATIONAL)
    with pytest.raises(ValueError):
        parse_number(True, RATIONAL)


def test_parse_number_float_mode_accepts_fraction_strings():
    assert parse_number("1/4", FLOAT) == 0.25
    assert parse_number("0.5", FLOAT) == 0.5


def test_format_and_mode_helpers():
    assert format_number(F(3, 4)) == "3/4"
    assert format_number(F(4)) == "4"
    assert format_number(0.5) == 0.5
    assert to_mode(F(1, 2), FLOAT) == 0.5
    assert is_close(F(1, 3), F(1, 3), RATIONAL)
    assert not is_close(F(1, 3), F(1, 3) + F(1, 10**30), RATIONAL)
    assert is_close(0.1 + 0.2, 0.3, FLOAT)
    with pytest.raises(ValueError):
        check_mode("decimal")


def test_bareiss_small_system():
    A = [[F(2), F(1)], [F(1), F(3)]]
    B = [[F(3)], [F(5)]]
    assert bareiss_solve(A, B) == [[F(4, 5)], [F(7, 5)]]


def test_bareiss_needs_row_swap():
    A = [[0, 1], [1, 0]]
    assert bareiss_solve(A, [[F(2)], [F(3)]]) == [[F(3)], [F(2)]]


def test_singular_systems_raise():
    with pytest.raises(SingularSystemError):
        bareiss_solve([[1, 2], [2, 4]], [[1], [2]])
    with pytest.raises(SingularSystemError):
        float_solve([[1.0, 2.0], [2.0, 4.0]], [[1.0], [2.0]])


def test_empty_system():
    assert bareiss_solve([], []) == []
    assert float_solve([], []) == []


small = st.fractions(min_value=-5, max_value=5, max_denominator=7)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.tuples(
    st.lists(st.lists(small, min_size=n, max_size=n), min_size=n, max_size=n),
    st.lists(st.lists(small, min_size=2, max_size=2), min_size=n, max_size=n),
)))
def test_bareiss_solution_satisfies_system(system):
    A, B = system
    n = len(A)
    # Diagonal dominance keeps the system regular.
    A = [[a + (20 if i == j else 0) for j, a in enumerate(row)] for i, row in enumerate(A)]
    X = bareiss_solve(A, B)
    for i in range(n):
        for c in range(2):
            assert sum(A[i][j] * X[j][c] for j in range(n)) == B[i][c]
    Xf = solve(A, B, FLOAT)
    for i in range(n):
        for c in range(2):
            assert Xf[i][c] == pytest.approx(float(X[i][c]), rel=1e-9, abs=1e-12)
