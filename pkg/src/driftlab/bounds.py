"""Linear hitting-time bounds assembled from coefficient tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

from .chain import LevelStats, StateChain
from .coeffs import LOWER, UPPER, CoefficientTable, check_distribution
from .errors import ChainError
from .numeric import RATIONAL, Number, format_number


class _Unbounded:
    """Upper bound that does not exist; compares greater than every number."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNBOUNDED"

    def __str__(self) -> str:
        return "unbounded"

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("driftlab.unbounded")

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True

    def __add__(self, other):
        return self

    __radd__ = __add__


UNBOUNDED = _Unbounded()


def is_unbounded(value) -> bool:
    return value is UNBOUNDED


def render(value) -> str | float:
    return "unbounded" if value is UNBOUNDED else format_number(value)


class BoundTerm(NamedTuple):
    """Contribution ``coefficient / climb`` of level ``ell``."""

    ell: int
    coefficient: Number
    climb: Number
    contribution: Number | _Unbounded


@dataclass(frozen=True)
class BoundReport:
    direction: str
    start: int | Mapping[int, Number]
    value: Number | _Unbounded
    terms: tuple[BoundTerm, ...]
    methods: tuple[str, ...]
    mode: str

    @property
    def unbounded(self) -> bool:
        return self.value is UNBOUNDED

    def to_json(self) -> dict:
        start = self.start if isinstance(self.start, int) else {str(k): render(v) for k, v in self.start.items()}
        return {
            "direction": self.direction,
            "start": start,
            "value": render(self.value),
            "methods": list(self.methods),
            "mode": self.mode,
            "terms": [
                {
                    "ell": t.ell,
                    "coefficient": render(t.coefficient),
                    "climb": render(t.climb),
                    "contribution": render(t.contribution),
                }
                for t in self.terms
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["direction", "ell", "coefficient", "climb", "contribution"])
        for t in self.terms:
            w.writerow([self.direction, t.ell, render(t.coefficient), render(t.climb), render(t.contribution)])
        return buf.getvalue()


def _climb(stats: LevelStats, ell: int, direction: str) -> Number:
    return stats.climb_max(ell) if direction == LOWER else stats.climb_min(ell)


def _term(stats: LevelStats, ell: int, coef: Number, direction: str) -> BoundTerm:
    climb = _climb(stats, ell, direction)
    if climb == 0:
        if direction == LOWER:
            raise ChainError(f"level {ell} unreachable upward, violates default assumption")
        return BoundTerm(ell, coef, climb, UNBOUNDED if coef != 0 else stats.zero)
    return BoundTerm(ell, coef, climb, coef / climb)


def _total(stats: LevelStats, terms: Sequence[BoundTerm]):
    total = stats.zero
    for t in terms:
        if t.contribution is UNBOUNDED:
            return UNBOUNDED
        total += t.contribution
    return total


def _check_start(stats: LevelStats, k: int) -> None:
    if not 1 <= k <= stats.K:
        raise ValueError(f"start level {k} out of range 1..{stats.K}")


def lower_time_bound(stats: LevelStats, table: CoefficientTable, k: int) -> BoundReport:
    """``sum_{l=1}^{k} c_{k,l} / p_max(X_l, S_[0,l-1])``."""
    if table.direction != LOWER:
        raise ValueError("lower_time_bound needs a lower-direction table")
    _check_start(stats, k)
    terms = tuple(_term(stats, ell, table.get(k, ell), LOWER) for ell in range(k, 0, -1))
    return BoundReport(LOWER, k, _total(stats, terms), terms, (table.method,), stats.mode)


def upper_time_bound(stats: LevelStats, table: CoefficientTable, k: int) -> BoundReport:
    """``sum_{l=1}^{k} c_{k,l} / p_min(X_l, S_[0,l-1])``, or unbounded."""
    if table.direction != UPPER:
        raise ValueError("upper_time_bound needs an upper-direction table")
    _check_start(stats, k)
    terms = tuple(_term(stats, ell, table.get(k, ell), UPPER) for ell in range(k, 0, -1))
    return BoundReport(UPPER, k, _total(stats, terms), terms, (table.method,), stats.mode)


def time_bound(stats: LevelStats, table: CoefficientTable, k: int) -> BoundReport:
    if table.direction == LOWER:
        return lower_time_bound(stats, table, k)
    return upper_time_bound(stats, table, k)


WEIGHTED = "weighted"
DK = "dk"


def typed_bounds(
    stats: LevelStats,
    coeffs: Number | Mapping[int, Number],
    *,
    start: int | None = None,
    init: Mapping[int, Number] | None = None,
    direction: str = LOWER,
    form: str = WEIGHTED,
    method: str = "typed",
) -> BoundReport:
    """Bounds from a constant ``c`` or per-level ``c_l``.

    ``form="weighted"`` averages the per-start bound over the start
    distribution (a single start level is the point mass), which for a
    constant ``c`` is the viscosity form. ``form="dk"`` is
    ``sum_l c_l / p_max(X_l, S_[0,l-1])``; it is meant for coefficients that
    already account for a random start.
    """
    if isinstance(coeffs, Mapping):
        cl = {int(k): v for k, v in coeffs.items()}
    else:
        cl = {ell: coeffs for ell in range(1, stats.K + 1)}
    if form == DK:
        terms = tuple(_term(stats, ell, cl.get(ell, stats.one), direction) for ell in range(stats.K, 0, -1))
        origin = dict(init) if init is not None else {}
        return BoundReport(direction, origin, _total(stats, terms), terms, (method, DK), stats.mode)
    if form != WEIGHTED:
        raise ValueError(f"form must be 'weighted' or 'dk', got {form!r}")
    if (start is None) == (init is None):
        raise ValueError("give exactly one of start or init")
    if start is not None:
        _check_start(stats, start)
        dist = check_distribution(stats, {start: stats.one})
        origin: int | Mapping[int, Number] = start
    else:
        dist = check_distribution(stats, init)
        origin = dist
    terms = []
    above = stats.zero  # mass of start levels strictly higher in index than ell
    for ell in range(stats.K, 0, -1):
        weight = dist[ell] + cl.get(ell, stats.one) * above
        above += dist[ell]
        terms.append(_term(stats, ell, weight, direction))
    terms = tuple(terms)
    return BoundReport(direction, origin, _total(stats, terms), terms, (method, WEIGHTED), stats.mode)


# Drift of the induced time function ---------------------------------------


def drift_function(stats: LevelStats, table: CoefficientTable) -> dict[str, Number | _Unbounded]:
    """``d(X_k) = sum_{l=1}^{k} c_{k,l} / p(X_l, S_[0,l-1])`` with the table's extremum."""
    per_level = [stats.zero]
    for k in range(1, stats.K + 1):
        terms = [_term(stats, ell, table.get(k, ell), table.direction) for ell in range(k, 0, -1)]
        per_level.append(_total(stats, terms))
    return {x: per_level[k] for k in range(stats.K + 1) for x in stats.states(k)}


class DriftFailure(NamedTuple):
    state: str
    drift: Number


@dataclass(frozen=True)
class DriftCheck:
    direction: str
    drifts: Mapping[str, Number] = field(repr=False)
    violations: tuple[DriftFailure, ...]
    skipped: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_drift_inequality(
    chain: StateChain,
    stats: LevelStats,
    table: CoefficientTable,
    tol: float = 1e-10,
) -> DriftCheck:
    """One-step drift of the induced ``d`` at every non-optimal state.

    A lower table must give drift at most 1 and an upper table at least 1.
    States whose ``d`` or successors' ``d`` is unbounded are skipped.
    """
    d = drift_function(stats, table)
    slack = 0 if chain.mode == RATIONAL else tol
    drifts: dict[str, Number] = {}
    bad, skipped = [], []
    for k in range(1, stats.K + 1):
        for x in stats.states(k):
            row = chain.rows[x]
            if d[x] is UNBOUNDED or any(d[y] is UNBOUNDED for y in row):
                skipped.append(x)
                continue
            delta = sum((p * (d[x] - d[y]) for y, p in row.items()), stats.zero)
            drifts[x] = delta
            if table.direction == LOWER and delta > 1 + slack:
                bad.append(DriftFailure(x, delta))
            if table.direction == UPPER and delta < 1 - slack:
                bad.append(DriftFailure(x, delta))
    return DriftCheck(table.direction, drifts, tuple(bad), tuple(skipped))


# Comparing two algorithms --------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    """Bounds on ``m_A / m_B`` and, when known, its exact value."""

    low: Number | _Unbounded
    high: Number | _Unbounded
    exact: Number | None = None

    def contains(self, value) -> bool:
        return self.low <= value <= self.high

    def to_json(self) -> dict:
        return {
            "ratio_low": render(self.low),
            "ratio_high": render(self.high),
            "exact_ratio": None if self.exact is None else render(self.exact),
        }


def _value(x):
    return x.value if isinstance(x, BoundReport) else x


def _ratio(num, den):
    if num is UNBOUNDED:
        return UNBOUNDED
    if den is UNBOUNDED:
        return 0 * num
    if den == 0:
        return UNBOUNDED if num != 0 else 0 * num
    return num / den


def compare_algorithms(
    a_lower: BoundReport | Number,
    a_upper: BoundReport | Number,
    b_lower: BoundReport | Number,
    b_upper: BoundReport | Number,
    exact_a: Number | None = None,
    exact_b: Number | None = None,
) -> Comparison:
    """Interval ``[A_lower / B_upper, A_upper / B_lower]`` for ``m_A / m_B``."""
    low = _ratio(_value(a_lower), _value(b_upper))
    high = _ratio(_value(a_upper), _value(b_lower))
    exact = None
    if exact_a is not None and exact_b is not None:
        exact = _ratio(exact_a, exact_b)
    return Comparison(low, high, exact)
