"""Coefficients ``c_{k,l}`` bounding the hitting probability ``h(X_k, S_l)``.

Lower-direction tables satisfy ``c_{k,l} <= h_min(X_k, S_l)`` and upper tables
``c_{k,l} >= h_max(X_k, S_l)``. Every family assigns the extremal value its
drift condition allows. Upper entries are clamped to 1 on output only, so the
recursions themselves stay linear.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Mapping, NamedTuple, Sequence

from .chain import LevelGraph, LevelStats, Path, build_level_graph, check_path, select_path
from .errors import ConvergenceError, GuardError, PathError
from .numeric import FLOAT_ROW_TOL, RATIONAL, Number, format_number, parse_number

LOWER = "lower"
UPPER = "upper"
DIRECTIONS = (LOWER, UPPER)

ALLPATH_MAX_K = 14

METHODS = (
    "forward",
    "forward_levelwise",
    "reverse",
    "allpath",
    "path",
    "path_recursive",
    "type_c",
    "type_cl",
    "random_init",
)


def _check_direction(direction: str) -> str:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be 'lower' or 'upper', got {direction!r}")
    return direction


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Coefficients ``c_{k,l}`` for ``1 <= l < k <= K`` plus the fixed entries.

    Entries not stored explicitly take the trivial value for the direction:
    0 for lower tables, 1 for upper tables. ``c_{k,k}`` and ``c_{k,0}`` are 1
    and ``c_{k,l}`` is 0 for ``l > k``.
    """

    direction: str
    method: str
    K: int
    mode: str
    values: Mapping[tuple[int, int], Number]

    def _num(self, v: int) -> Number:
        return parse_number(v, self.mode) if self.mode == RATIONAL else float(v)

    def get(self, k: int, ell: int) -> Number:
        if ell > k:
            return self._num(0)
        if ell == k or ell == 0:
            return self._num(1)
        if (k, ell) in self.values:
            return self.values[(k, ell)]
        return self._num(0 if self.direction == LOWER else 1)

    def entries(self) -> Iterator[tuple[int, int, Number]]:
        """All ``(k, l, c)`` with ``0 <= l <= k <= K``, row by row."""
        for k in range(self.K + 1):
            for ell in range(k + 1):
                yield k, ell, self.get(k, ell)

    def free_entries(self) -> Iterator[tuple[int, int, Number]]:
        for k in range(2, self.K + 1):
            for ell in range(1, k):
                yield k, ell, self.get(k, ell)

    def column(self, ell: int) -> dict[int, Number]:
        return {k: self.get(k, ell) for k in range(ell, self.K + 1)}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "ell", "value", "method", "direction"])
        for k, ell, v in self.entries():
            w.writerow([k, ell, format_number(v), self.method, self.direction])
        return buf.getvalue()


def _clamp(values: Mapping[tuple[int, int], Number], direction: str, one: Number) -> dict:
    if direction == LOWER:
        return dict(values)
    return {key: (v if v <= one else one) for key, v in values.items()}


def _table(stats: LevelStats, direction: str, method: str, values: Mapping) -> CoefficientTable:
    return CoefficientTable(direction, method, stats.K, stats.mode, _clamp(values, direction, stats.one))


def _pick(direction: str):
    return min if direction == LOWER else max


def _r_ext(stats: LevelStats, direction: str, k: int, targets) -> Number:
    return stats.r_min(k, targets) if direction == LOWER else stats.r_max(k, targets)


def _check_pair(stats: LevelStats, ell: int, k: int | None) -> int:
    k = stats.K if k is None else k
    if not 1 <= ell <= k <= stats.K:
        raise ValueError(f"need 1 <= ell <= k <= K, got ell={ell}, k={k}, K={stats.K}")
    return k


# Forward recursions --------------------------------------------------------


def _forward_statewise(stats: LevelStats, ell: int, k: int, direction: str) -> dict[int, Number]:
    pick = _pick(direction)
    col = {ell: stats.one}
    for j in range(ell + 1, k + 1):
        best = None
        for x in stats.movers(j):
            r = stats.r[x]
            v = r[ell] + sum((r[i] * col[i] for i in range(ell + 1, j)), stats.zero)
            best = v if best is None else pick(best, v)
        col[j] = best
    return col


def _forward_levelwise(stats: LevelStats, ell: int, k: int, direction: str) -> dict[int, Number]:
    col = {ell: stats.one}
    for j in range(ell + 1, k + 1):
        col[j] = sum((_r_ext(stats, direction, j, i) * col[i] for i in range(ell, j)), stats.zero)
    return col


def _forward(stats, ell, k, direction, pointwise) -> dict[int, Number]:
    if pointwise:
        return _forward_statewise(stats, ell, k, direction)
    return _forward_levelwise(stats, ell, k, direction)


def lower_coeffs_forward(stats: LevelStats, ell: int, k: int | None = None, pointwise: bool = True) -> CoefficientTable:
    """Column ``l`` built upward from ``l+1`` to ``k``.

    With ``pointwise`` (the default) the minimum is taken per state over the
    whole right-hand side; otherwise each conditional transition is replaced
    by its level-wise minimum first, which is never tighter.
    """
    k = _check_pair(stats, ell, k)
    col = _forward(stats, ell, k, LOWER, pointwise)
    method = "forward" if pointwise else "forward_levelwise"
    return _table(stats, LOWER, method, {(j, ell): v for j, v in col.items() if j > ell})


def upper_coeffs_forward(stats: LevelStats, ell: int, k: int | None = None, pointwise: bool = True) -> CoefficientTable:
    k = _check_pair(stats, ell, k)
    col = _forward(stats, ell, k, UPPER, pointwise)
    method = "forward" if pointwise else "forward_levelwise"
    return _table(stats, UPPER, method, {(j, ell): v for j, v in col.items() if j > ell})


# Reverse recursion ---------------------------------------------------------


def _reverse_row(stats: LevelStats, k: int, ell: int, direction: str) -> dict[int, Number]:
    row = {k: stats.one}
    for target in range(k - 1, ell - 1, -1):
        row[target] = sum(
            (row[i] * _r_ext(stats, direction, i, target) for i in range(target + 1, k + 1)),
            stats.zero,
        )
    return row


def coeffs_reverse(stats: LevelStats, k: int, ell: int = 1, direction: str = LOWER) -> CoefficientTable:
    """Row ``k`` built downward: ``c_{k,k-1}, c_{k,k-2}, ..., c_{k,l}``."""
    _check_direction(direction)
    _check_pair(stats, ell, k)
    row = _reverse_row(stats, k, ell, direction)
    return _table(stats, direction, "reverse", {(k, t): v for t, v in row.items() if t < k})


# Explicit sum over every descending sequence -------------------------------


def _allpath_value(stats: LevelStats, j: int, ell: int, direction: str) -> Number:
    total = stats.zero
    inner = range(ell + 1, j)
    for size in range(len(inner) + 1):
        for mids in combinations(reversed(inner), size):
            seq = (j,) + mids + (ell,)
            term = stats.one
            for a, b in zip(seq, seq[1:]):
                term *= _r_ext(stats, direction, a, b)
                if term == 0:
                    break
            total += term
    return total


def _guard_allpath(stats: LevelStats) -> None:
    if stats.K > ALLPATH_MAX_K:
        raise GuardError(
            f"allpath enumeration needs K <= {ALLPATH_MAX_K} (got K={stats.K}); use recursive form"
        )


def allpath_coeffs(stats: LevelStats, ell: int, k: int | None = None, direction: str = LOWER) -> CoefficientTable:
    """Column ``l`` as the sum over all descending level sequences of extremal ``r`` products."""
    _check_direction(direction)
    _guard_allpath(stats)
    k = _check_pair(stats, ell, k)
    vals = {(j, ell): _allpath_value(stats, j, ell, direction) for j in range(ell + 1, k + 1)}
    return _table(stats, direction, "allpath", vals)


# Path-restricted coefficients ----------------------------------------------


def _path_lower_explicit(stats: LevelStats, path: Path) -> dict[int, Number]:
    col = {}
    acc = stats.one
    for j in reversed(path.upper()):
        acc = acc * stats.r_min(j, path.below(j))
        col[j] = acc
    return col


def _path_lower_recursive(stats: LevelStats, path: Path) -> dict[int, Number]:
    ell = path.end
    col = {ell: stats.one}
    for j in reversed(path.upper()):
        best = None
        for x in stats.movers(j):
            r = stats.r[x]
            v = r[ell] + sum((r[i] * col[i] for i in path.between(j)), stats.zero)
            best = v if best is None or v < best else best
        col[j] = best
    del col[ell]
    return col


def _off_path(path: Path, j: int) -> tuple[int, ...]:
    """Levels ``[l, j)`` not on ``P(l, j)``."""
    inner = set(path.between(j))
    return tuple(i for i in range(path.end, j) if i not in inner)


def _path_upper_explicit(stats: LevelStats, path: Path) -> dict[int, Number]:
    col = {}
    acc = stats.zero
    for j in reversed(path.upper()):
        acc = acc + stats.r_max(j, _off_path(path, j))
        col[j] = acc
    return col


def _path_upper_recursive(stats: LevelStats, path: Path) -> dict[int, Number]:
    ell = path.end
    col = {}
    for j in reversed(path.upper()):
        off = _off_path(path, j)
        best = None
        for x in stats.movers(j):
            r = stats.r[x]
            v = sum((r[i] for i in off), stats.zero)
            v += sum((r[i] * col[i] for i in path.between(j)), stats.zero)
            best = v if best is None or v > best else best
        col[j] = best
    return col


def _path_column(stats: LevelStats, path: Path, direction: str, recursive: bool) -> dict[tuple[int, int], Number]:
    ell, k = path.end, path.start
    if direction == LOWER:
        col = _path_lower_recursive(stats, path) if recursive else _path_lower_explicit(stats, path)
        fill = stats.zero
    else:
        col = _path_upper_recursive(stats, path) if recursive else _path_upper_explicit(stats, path)
        fill = stats.one
    return {(j, ell): col.get(j, fill) for j in range(ell + 1, k + 1)}


def _check_path_levels(stats: LevelStats, path: Path) -> None:
    if not (1 <= path.end < path.start <= stats.K):
        raise PathError(f"path {path} must run from k to l with 1 <= l < k <= K={stats.K}")


def path_lower_coeffs(
    stats: LevelStats,
    path: Path,
    recursive: bool = False,
    graph: LevelGraph | None = None,
) -> CoefficientTable:
    """Column ``l`` from one path; levels off the path get 0.

    The explicit form multiplies, along the path, the least chance of
    dropping onto the remaining lower part of the path. ``recursive=True``
    uses the per-state recursion instead, which is never smaller.
    """
    _check_path_levels(stats, path)
    check_path(graph or build_level_graph(stats), path)
    tag = f"path_recursive({path})" if recursive else f"path({path})"
    return _table(stats, LOWER, tag, _path_column(stats, path, LOWER, recursive))


def path_upper_coeffs(
    stats: LevelStats,
    path: Path,
    recursive: bool = False,
    graph: LevelGraph | None = None,
) -> CoefficientTable:
    """Column ``l`` from one path; levels off the path get 1."""
    _check_path_levels(stats, path)
    check_path(graph or build_level_graph(stats), path)
    tag = f"path_recursive({path})" if recursive else f"path({path})"
    return _table(stats, UPPER, tag, _path_column(stats, path, UPPER, recursive))


# Type-c and Type-c_l --------------------------------------------------------


def _ratios(stats: LevelStats, ell: int) -> Iterator[Number]:
    """``p(X, S_l) / p(X, S_[0,l])`` over states above ``l`` where defined."""
    for k in range(ell + 1, stats.K + 1):
        for x in stats.states(k):
            p = stats.p[x]
            denom = sum(p[: ell + 1], stats.zero)
            if denom > 0:
                yield p[ell] / denom


def type_c_coeff(stats: LevelStats, direction: str = LOWER) -> Number:
    """One coefficient valid for every pair ``k > l >= 1``."""
    _check_direction(direction)
    vals = [v for ell in range(1, stats.K) for v in _ratios(stats, ell)]
    if not vals:
        raise ValueError("type-c coefficient needs at least two non-optimal levels")
    return _pick(direction)(vals)


def type_cl_coeffs(stats: LevelStats, direction: str = LOWER) -> dict[int, Number]:
    """Per-target coefficients ``c_l`` for ``1 <= l < K``."""
    _check_direction(direction)
    out = {}
    for ell in range(1, stats.K):
        vals = list(_ratios(stats, ell))
        if not vals:
            raise ValueError(f"no state above level {ell} can climb to S_[0,{ell}]")
        out[ell] = _pick(direction)(vals)
    if not out:
        raise ValueError("type-c_l coefficients need at least two non-optimal levels")
    return out


VACUOUS = "vacuous"
ZERO = "zero"


def check_distribution(stats: LevelStats, init: Mapping[int, Number]) -> dict[int, Number]:
    dist = {int(k): v for k, v in init.items()}
    for k, v in dist.items():
        if not 0 <= k <= stats.K:
            raise ValueError(f"initial distribution names level {k} outside 0..{stats.K}")
        if v < 0:
            raise ValueError(f"negative initial probability {v} for level {k}")
    total = sum(dist.values(), stats.zero)
    ok = total == 1 if stats.mode == RATIONAL else abs(total - 1.0) <= FLOAT_ROW_TOL
    if not ok:
        raise ValueError(f"initial distribution sums to {total}, not 1")
    return {k: dist.get(k, stats.zero) for k in range(stats.K + 1)}


def random_init_coeffs(
    stats: LevelStats,
    init: Mapping[int, Number],
    empty_prefix: str = VACUOUS,
) -> dict[int, Number]:
    """Per-level ``c_l`` for a random start, ``1 <= l <= K``.

    Each ``c_l`` is the Type-c_l value further capped by
    ``Pr(start in S_l) / Pr(start in S_[0,l])``. When the start can never be
    in ``S_[0,l]`` the cap reads ``c_l * 0 <= 0`` and imposes nothing
    (``empty_prefix="vacuous"``); ``empty_prefix="zero"`` sets ``c_l = 0``
    there instead.
    """
    if empty_prefix not in (VACUOUS, ZERO):
        raise ValueError(f"empty_prefix must be 'vacuous' or 'zero', got {empty_prefix!r}")
    dist = check_distribution(stats, init)
    cl = type_cl_coeffs(stats, LOWER) if stats.K >= 2 else {}
    out = {}
    prefix = stats.zero
    for ell in range(0, stats.K + 1):
        prefix += dist[ell]
        if ell == 0:
            continue
        c = cl.get(ell, stats.one)
        if prefix > 0:
            c = min(c, dist[ell] / prefix)
        elif empty_prefix == ZERO:
            c = stats.zero
        out[ell] = c
    return out


# Whole tables --------------------------------------------------------------


def default_paths(
    stats: LevelStats,
    graph: LevelGraph | None = None,
    strategy: str = "shortest",
    explicit: Sequence[int] | None = None,
) -> dict[int, Path]:
    """One path per target column, starting from the highest level that has one.

    An explicit vertex list claims the column of its last vertex.
    """
    graph = graph or build_level_graph(stats)
    out: dict[int, Path] = {}
    chosen = select_path(graph, explicit[0], explicit[-1], explicit) if explicit else None
    for ell in range(1, stats.K):
        if chosen is not None and chosen.end == ell:
            out[ell] = chosen
            continue
        for k in range(stats.K, ell, -1):
            try:
                out[ell] = select_path(graph, k, ell, strategy)
                break
            except PathError:
                continue
    return out


def path_table(
    stats: LevelStats,
    direction: str,
    paths: Mapping[int, Path],
    recursive: bool = False,
) -> CoefficientTable:
    """Combine per-column paths into one table; columns without a path stay trivial."""
    _check_direction(direction)
    values: dict[tuple[int, int], Number] = {}
    tags = []
    for ell in sorted(paths):
        p = paths[ell]
        values.update(_path_column(stats, p, direction, recursive))
        tags.append(str(p))
    name = "path_recursive" if recursive else "path"
    return _table(stats, direction, f"{name}[{';'.join(tags)}]", values)


def coefficient_table(
    stats: LevelStats,
    method: str,
    direction: str = LOWER,
    *,
    paths: Mapping[int, Path] | None = None,
    init: Mapping[int, Number] | None = None,
    empty_prefix: str = VACUOUS,
) -> CoefficientTable:
    """Full table for every ``1 <= l < k <= K`` with one coefficient family."""
    _check_direction(direction)
    K = stats.K
    values: dict[tuple[int, int], Number] = {}
    if method in ("forward", "forward_levelwise"):
        pointwise = method == "forward"
        for ell in range(1, K):
            col = _forward(stats, ell, K, direction, pointwise)
            values.update({(j, ell): v for j, v in col.items() if j > ell})
    elif method == "reverse":
        for k in range(2, K + 1):
            row = _reverse_row(stats, k, 1, direction)
            values.update({(k, t): v for t, v in row.items() if t < k})
    elif method == "allpath":
        _guard_allpath(stats)
        for ell in range(1, K):
            for j in range(ell + 1, K + 1):
                values[(j, ell)] = _allpath_value(stats, j, ell, direction)
    elif method in ("path", "path_recursive"):
        if paths is None:
            paths = default_paths(stats)
        return path_table(stats, direction, paths, recursive=method == "path_recursive")
    elif method == "type_c":
        if K >= 2:
            c = type_c_coeff(stats, direction)
            values = {(k, ell): c for k in range(2, K + 1) for ell in range(1, k)}
    elif method == "type_cl":
        if K >= 2:
            cl = type_cl_coeffs(stats, direction)
            values = {(k, ell): cl[ell] for k in range(2, K + 1) for ell in range(1, k)}
    elif method == "random_init":
        if direction != LOWER:
            raise ValueError("random-initialization coefficients exist for the lower direction only")
        if init is None:
            raise ValueError("random_init needs an initial level distribution")
        cl = random_init_coeffs(stats, init, empty_prefix)
        values = {(k, ell): cl[ell] for k in range(2, K + 1) for ell in range(1, k)}
    else:
        raise ValueError(f"unknown coefficient method {method!r}; expected one of {METHODS}")
    return _table(stats, direction, method, values)


# Drift checks --------------------------------------------------------------


def conditional_drift(stats: LevelStats, table: CoefficientTable, x: str, ell: int) -> Number:
    """``c_{j,l} - sum_{i=l}^{j-1} r(x, S_i) c_{i,l}`` for ``x`` in ``S_j``."""
    j = stats.partition.level_of[x]
    if x in stats.stuck:
        raise ConvergenceError(f"state {x} never leaves level {j}; its conditional drift is undefined")
    r = stats.r[x]
    return table.get(j, ell) - sum((r[i] * table.get(i, ell) for i in range(ell, j)), stats.zero)


class DriftViolation(NamedTuple):
    state: str
    ell: int
    drift: Number


def drift_violations(stats: LevelStats, table: CoefficientTable, tol: float = 1e-12) -> list[DriftViolation]:
    """States whose conditional drift has the wrong sign for the table's direction."""
    slack = 0 if stats.mode == RATIONAL else tol
    out = []
    for j in range(2, stats.K + 1):
        for x in stats.movers(j):
            for ell in range(1, j):
                d = conditional_drift(stats, table, x, ell)
                bad = d > slack if table.direction == LOWER else d < -slack
                if bad:
                    out.append(DriftViolation(x, ell, d))
    return out


class DominanceEntry(NamedTuple):
    k: int
    ell: int
    cl: Number
    ckl: Number


@dataclass(frozen=True)
class DominanceReport:
    direction: str
    violations: tuple[DominanceEntry, ...]
    strict: tuple[DominanceEntry, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def dominance_check(cl_table: CoefficientTable, ckl_table: CoefficientTable) -> DominanceReport:
    """Check that ``c_{k,l}`` is at least as tight as ``c_l`` at every entry.

    Lower tables need ``c_{k,l} >= c_l``; upper tables ``c_{k,l} <= c_l``.
    Entries where the inequality is strict are reported as well.
    """
    if cl_table.K != ckl_table.K:
        raise ValueError(f"tables differ in size: K={cl_table.K} vs K={ckl_table.K}")
    if cl_table.direction != ckl_table.direction:
        raise ValueError("tables differ in direction")
    bad, strict = [], []
    for k, ell, a in cl_table.free_entries():
        b = ckl_table.get(k, ell)
        worse = b < a if cl_table.direction == LOWER else b > a
        if worse:
            bad.append(DominanceEntry(k, ell, a, b))
        elif a != b:
            strict.append(DominanceEntry(k, ell, a, b))
    return DominanceReport(cl_table.direction, tuple(bad), tuple(strict))


def read_table_csv(text: str) -> CoefficientTable:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty coefficient CSV")
    mode = RATIONAL if all(isinstance(r["value"], str) and "." not in r["value"] for r in rows) else "float"
    values = {}
    K = 0
    for r in rows:
        k, ell = int(r["k"]), int(r["ell"])
        K = max(K, k)
        if 1 <= ell < k:
            values[(k, ell)] = parse_number(r["value"], mode)
    return CoefficientTable(rows[0]["direction"], rows[0]["method"], K, mode, values)
