"""Elitist absorbing Markov chains and their fitness-level structure.

A :class:`StateChain` is the raw transition structure. From it we derive a
:class:`LevelPartition` (levels ordered by strictly decreasing fitness, level 0
being the optimal set), :class:`LevelStats` (per-state transition mass into
each level plus the level-wise extrema used by every bound), and a
:class:`LevelGraph` whose arcs carry the paths used by path-based coefficients.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

from .errors import ChainError, ConvergenceError, PathError
from .numeric import FLOAT, FLOAT_ROW_TOL, RATIONAL, Number, check_mode, format_number, parse_number


@dataclass(frozen=True, eq=False)
class StateChain:
    """Finite homogeneous chain with exact (or float) fitness and transitions.

    ``rows[x]`` maps successor states to their positive transition
    probability; absent successors have probability zero.
    """

    states: tuple[str, ...]
    fitness: Mapping[str, Number]
    rows: Mapping[str, Mapping[str, Number]]
    optimal_set: frozenset[str]
    mode: str = RATIONAL

    @classmethod
    def build(
        cls,
        rows: Mapping[str, Mapping[str, Number]],
        fitness: Mapping[str, Number],
        optimal: Iterable[str] | None = None,
        mode: str = RATIONAL,
    ) -> StateChain:
        """Assemble a chain, dropping zero entries.

        States follow the key order of ``fitness``. Without ``optimal`` the
        optimal set is taken to be the maximum-fitness states.
        """
        check_mode(mode)
        states = tuple(str(s) for s in fitness)
        clean_rows = {
            str(x): {str(y): p for y, p in row.items() if p != 0} for x, row in rows.items()
        }
        fit = {str(s): f for s, f in fitness.items()}
        if optimal is None:
            best = max(fit.values())
            optimal = [s for s in states if fit[s] == best]
        return cls(states, fit, clean_rows, frozenset(str(s) for s in optimal), mode)

    def prob(self, x: str, y: str) -> Number:
        return self.rows.get(x, {}).get(y, self._zero)

    @property
    def _zero(self) -> Number:
        return Fraction(0) if self.mode == RATIONAL else 0.0

    def to_float(self) -> StateChain:
        if self.mode == FLOAT:
            return self
        return StateChain(
            self.states,
            {s: float(f) for s, f in self.fitness.items()},
            {x: {y: float(p) for y, p in row.items()} for x, row in self.rows.items()},
            self.optimal_set,
            FLOAT,
        )

    def __len__(self) -> int:
        return len(self.states)


class Violation(NamedTuple):
    code: str
    state: str | None
    detail: str

    def __str__(self) -> str:
        where = f" at {self.state}" if self.state is not None else ""
        return f"{self.code}{where}: {self.detail}"


def _numeric_ok(value, mode: str) -> bool:
    if mode == RATIONAL:
        return isinstance(value, (int, Fraction)) and not isinstance(value, bool)
    return isinstance(value, float)


def validate_chain(chain: StateChain) -> list[Violation]:
    """Check every StateChain invariant; returns an empty list when valid."""
    out: list[Violation] = []
    known = set(chain.states)
    mode = chain.mode
    if len(known) != len(chain.states):
        out.append(Violation("duplicate state", None, "state identifiers must be unique"))
    for s in chain.states:
        if s not in chain.fitness:
            out.append(Violation("missing fitness", s, "no fitness value"))
        elif not _numeric_ok(chain.fitness[s], mode):
            out.append(Violation("mixed numeric mode", s, f"fitness {chain.fitness[s]!r} in {mode} chain"))
    for x in chain.rows:
        if x not in known:
            out.append(Violation("unknown state", x, "row for undeclared state"))
    for x in chain.states:
        row = chain.rows.get(x)
        if row is None:
            out.append(Violation("missing row", x, "no outgoing transitions"))
            continue
        total = chain._zero
        for y, p in row.items():
            if y not in known:
                out.append(Violation("unknown state", x, f"transition to undeclared state {y!r}"))
                continue
            if not _numeric_ok(p, mode):
                out.append(Violation("mixed numeric mode", x, f"p({x},{y})={p!r} in {mode} chain"))
                continue
            if p < 0 or p > 1:
                out.append(Violation("probability out of range", x, f"p({x},{y})={p}"))
            total += p
            if x in chain.fitness and y in chain.fitness and chain.fitness[y] < chain.fitness[x] and p > 0:
                out.append(Violation("elitism violated", x, f"p({x},{y})={p} > 0 but f({y}) < f({x})"))
        stochastic = total == 1 if mode == RATIONAL else abs(total - 1.0) <= FLOAT_ROW_TOL
        if not stochastic:
            out.append(Violation("row not stochastic", x, f"row sums to {total}"))
    if not chain.states:
        out.append(Violation("empty chain", None, "no states"))
        return out
    if any(v.code in ("missing fitness", "mixed numeric mode") for v in out):
        return out
    best = max(chain.fitness[s] for s in chain.states)
    expected_opt = {s for s in chain.states if chain.fitness[s] == best}
    if set(chain.optimal_set) != expected_opt:
        out.append(
            Violation(
                "optimal set mismatch",
                None,
                f"declared {sorted(chain.optimal_set)}, maximum-fitness states {sorted(expected_opt)}",
            )
        )
    # Convergence: every state must reach the optimal set in the support digraph.
    preds: dict[str, list[str]] = {s: [] for s in chain.states}
    for x in chain.states:
        for y, p in chain.rows.get(x, {}).items():
            if p > 0 and y in preds:
                preds[y].append(x)
    seen = set(s for s in chain.optimal_set if s in known)
    queue = deque(seen)
    while queue:
        y = queue.popleft()
        for x in preds[y]:
            if x not in seen:
                seen.add(x)
                queue.append(x)
    for s in chain.states:
        if s not in seen:
            out.append(Violation("not convergent", s, "optimal set unreachable"))
    return out


def require_valid(chain: StateChain) -> None:
    problems = validate_chain(chain)
    if problems:
        shown = "; ".join(str(v) for v in problems[:5])
        more = f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""
        raise ChainError(f"invalid chain: {shown}{more}")


@dataclass(frozen=True, eq=False)
class LevelPartition:
    """Levels ``S_0..S_K`` by strictly decreasing fitness; ``S_0`` is optimal."""

    levels: tuple[tuple[str, ...], ...]
    level_of: Mapping[str, int]
    fitness: tuple[Number, ...]

    @property
    def K(self) -> int:
        return len(self.levels) - 1

    def union(self, indices: Iterable[int]) -> set[str]:
        out: set[str] = set()
        for i in indices:
            out.update(self.levels[i])
        return out


def build_level_partition(chain: StateChain) -> LevelPartition:
    require_valid(chain)
    values = sorted(set(chain.fitness[s] for s in chain.states), reverse=True)
    index = {f: i for i, f in enumerate(values)}
    buckets: list[list[str]] = [[] for _ in values]
    for s in chain.states:
        buckets[index[chain.fitness[s]]].append(s)
    levels = tuple(tuple(b) for b in buckets)
    level_of = {s: i for i, lv in enumerate(levels) for s in lv}
    return LevelPartition(levels, level_of, tuple(values))


def _level_vector(chain: StateChain, partition: LevelPartition, x: str) -> list[Number]:
    vec = [chain._zero] * (partition.K + 1)
    for y, p in chain.rows[x].items():
        vec[partition.level_of[y]] += p
    return vec


def conditional_transition(chain: StateChain, partition: LevelPartition, x: str, ell: int) -> Number:
    """Probability of landing in ``S_ell`` given that ``x`` leaves its own level."""
    k = partition.level_of[x]
    if ell >= k:
        return chain._zero
    vec = _level_vector(chain, partition, x)
    leave = sum(vec[:k], chain._zero)
    if leave == 0:
        raise ConvergenceError(
            f"state {x} in level {k} never leaves its level; violates convergence assumption"
        )
    return vec[ell] / leave


def _as_levels(targets: int | Iterable[int]) -> tuple[int, ...]:
    if isinstance(targets, int):
        return (targets,)
    return tuple(targets)


@dataclass(frozen=True, eq=False)
class LevelStats:
    """Per-state level-wise transition mass and the extrema derived from it.

    ``p[x][i]`` is ``p(x, S_i)``; ``r[x][i]`` the same conditioned on leaving
    the level of ``x`` (zero for ``i >= level(x)``). Extremum queries accept
    either one level index or an iterable of indices, in which case the
    probability of the union is extremized state by state.

    A ``stuck`` state only moves inside its own level, so its ``r`` is
    undefined (stored as zeros). Its eventual exit is a mixture of the exits
    of its level mates, so ``r`` extrema run over the other states only;
    ``p`` extrema still include it, which makes ``climb_min`` zero.
    """

    partition: LevelPartition
    mode: str
    p: Mapping[str, tuple[Number, ...]]
    r: Mapping[str, tuple[Number, ...]]
    stuck: frozenset[str] = frozenset()

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def zero(self) -> Number:
        return Fraction(0) if self.mode == RATIONAL else 0.0

    @property
    def one(self) -> Number:
        return Fraction(1) if self.mode == RATIONAL else 1.0

    def states(self, k: int) -> tuple[str, ...]:
        return self.partition.levels[k]

    def movers(self, k: int) -> tuple[str, ...]:
        """States of ``S_k`` that can leave the level in one step."""
        return tuple(x for x in self.partition.levels[k] if x not in self.stuck)

    def _mass(self, table, x: str, levels: tuple[int, ...]) -> Number:
        vec = table[x]
        return sum((vec[i] for i in levels), self.zero)

    def p_min(self, k: int, targets: int | Iterable[int]) -> Number:
        lv = _as_levels(targets)
        return min(self._mass(self.p, x, lv) for x in self.states(k))

    def p_max(self, k: int, targets: int | Iterable[int]) -> Number:
        lv = _as_levels(targets)
        return max(self._mass(self.p, x, lv) for x in self.states(k))

    def r_min(self, k: int, targets: int | Iterable[int]) -> Number:
        lv = _as_levels(targets)
        return min(self._mass(self.r, x, lv) for x in self.movers(k))

    def r_max(self, k: int, targets: int | Iterable[int]) -> Number:
        lv = _as_levels(targets)
        return max(self._mass(self.r, x, lv) for x in self.movers(k))

    def climb_max(self, k: int) -> Number:
        """``p_max(X_k, S_[0,k-1])``: fastest escape from level ``k``."""
        return self.p_max(k, range(k))

    def climb_min(self, k: int) -> Number:
        return self.p_min(k, range(k))

    def extrema_rows(self) -> list[dict]:
        """One row per (k, ell < k) with the extrema toward ``S_ell`` and ``S_[0,ell]``."""
        rows = []
        for k in range(1, self.K + 1):
            for ell in range(k):
                rows.append(
                    {
                        "k": k,
                        "ell": ell,
                        "p_min": self.p_min(k, ell),
                        "p_max": self.p_max(k, ell),
                        "p_prefix_min": self.p_min(k, range(ell + 1)),
                        "p_prefix_max": self.p_max(k, range(ell + 1)),
                        "r_min": self.r_min(k, ell),
                        "r_max": self.r_max(k, ell),
                    }
                )
        return rows


def level_stats(chain: StateChain, partition: LevelPartition) -> LevelStats:
    p: dict[str, tuple[Number, ...]] = {}
    r: dict[str, tuple[Number, ...]] = {}
    stuck: set[str] = set()
    zero = chain._zero
    for x in chain.states:
        k = partition.level_of[x]
        vec = _level_vector(chain, partition, x)
        if any(vec[i] != 0 for i in range(k + 1, len(vec))):
            raise ChainError(f"state {x} moves to a lower fitness level; chain is not elitist")
        p[x] = tuple(vec)
        leave = sum(vec[:k], zero)
        if k > 0 and leave == 0:
            stuck.add(x)
            r[x] = tuple(zero for _ in vec)
            continue
        r[x] = tuple(vec[i] / leave if i < k else zero for i in range(len(vec)))
    for k in range(1, partition.K + 1):
        if all(x in stuck for x in partition.levels[k]):
            raise ConvergenceError(
                f"level {k} ({partition.levels[k][0]}...) is never left; violates convergence assumption"
            )
    return LevelStats(partition, chain.mode, p, r, frozenset(stuck))


@dataclass(frozen=True)
class LevelGraph:
    """Level digraph: arc ``(k, ell)`` iff every state of ``S_k`` can jump to ``S_ell``."""

    K: int
    arcs: frozenset[tuple[int, int]]

    def has_arc(self, k: int, ell: int) -> bool:
        return (k, ell) in self.arcs

    def successors(self, k: int) -> tuple[int, ...]:
        return tuple(sorted(ell for (src, ell) in self.arcs if src == k))

    def all_paths(self, k: int, ell: int) -> Iterator[Path]:
        """Every simple path from ``k`` down to ``ell``, in lexicographic order."""
        if k == ell:
            yield Path((ell,))
            return

        def walk(prefix: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
            v = prefix[-1]
            if v == ell:
                yield prefix
                return
            for u in self.successors(v):
                if u >= ell:
                    yield from walk(prefix + (u,))

        for verts in walk((k,)):
            yield Path(verts)


def build_level_graph(stats: LevelStats) -> LevelGraph:
    arcs = set()
    for k in range(1, stats.K + 1):
        for ell in range(k):
            if stats.p_min(k, ell) > 0:
                arcs.add((k, ell))
    return LevelGraph(stats.K, frozenset(arcs))


@dataclass(frozen=True)
class Path:
    """Strictly descending level sequence ``k = v_0 > ... > v_m = ell``."""

    vertices: tuple[int, ...]
    _members: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = tuple(int(x) for x in self.vertices)
        if not v:
            raise PathError("empty path")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise PathError(f"path {list(v)} is not strictly descending")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "_members", frozenset(v))

    @property
    def start(self) -> int:
        return self.vertices[0]

    @property
    def end(self) -> int:
        return self.vertices[-1]

    def __contains__(self, v: int) -> bool:
        return v in self._members

    def __len__(self) -> int:
        return len(self.vertices)

    def below(self, i: int) -> tuple[int, ...]:
        """Path vertices strictly below ``i`` down to the end: ``P[ell, i)``."""
        return tuple(v for v in self.vertices if v < i)

    def between(self, i: int) -> tuple[int, ...]:
        """Path vertices strictly between the end and ``i``: ``P(ell, i)``."""
        return tuple(v for v in self.vertices if self.end < v < i)

    def upper(self) -> tuple[int, ...]:
        """``P(ell, k]``: the path without its end vertex."""
        return self.vertices[:-1]

    def __str__(self) -> str:
        return "->".join(str(v) for v in self.vertices)


def check_path(graph: LevelGraph, path: Path) -> None:
    for a, b in zip(path.vertices, path.vertices[1:]):
        if not graph.has_arc(a, b):
            raise PathError(f"path {path}: no arc ({a},{b}) in the level graph")


def select_path(graph: LevelGraph, k: int, ell: int, strategy: str | Sequence[int] = "consecutive") -> Path:
    """Pick a path from level ``k`` to level ``ell``.

    ``"consecutive"`` is ``k -> k-1 -> ... -> ell`` and fails if an arc is
    missing. ``"shortest"`` minimizes the vertex count, breaking ties by the
    lexicographically smallest sequence. A sequence of ints is validated and
    used as given.
    """
    if not (0 <= ell <= k <= graph.K):
        raise PathError(f"levels out of range: k={k}, ell={ell}, K={graph.K}")
    if not isinstance(strategy, str):
        path = Path(tuple(strategy))
        if path.start != k or path.end != ell:
            raise PathError(f"path {path} does not run from {k} to {ell}")
        check_path(graph, path)
        return path
    if k == ell:
        return Path((ell,))
    if strategy == "consecutive":
        path = Path(tuple(range(k, ell - 1, -1)))
        check_path(graph, path)
        return path
    if strategy == "shortest":
        inf = graph.K + 2
        dist = {ell: 0}
        for v in range(ell + 1, k + 1):
            best = inf
            for u in graph.successors(v):
                if u >= ell and dist.get(u, inf) + 1 < best:
                    best = dist[u] + 1
            dist[v] = best
        if dist[k] >= inf:
            raise PathError(f"no path from level {k} to level {ell}")
        verts = [k]
        while verts[-1] != ell:
            v = verts[-1]
            nxt = min(u for u in graph.successors(v) if u >= ell and dist.get(u, inf) == dist[v] - 1)
            verts.append(nxt)
        return Path(tuple(verts))
    raise ValueError(f"unknown path strategy {strategy!r}")


def chain_from_json(data: Mapping) -> StateChain:
    """Parse the chain JSON schema (``mode``, ``states``, ``rows``)."""
    mode = check_mode(data.get("mode", RATIONAL))
    fitness: dict[str, Number] = {}
    optimal = []
    for entry in data["states"]:
        sid = str(entry["id"])
        fitness[sid] = parse_number(entry["fitness"], mode)
        if entry.get("optimal"):
            optimal.append(sid)
    rows: dict[str, dict[str, Number]] = {s: {} for s in fitness}
    for entry in data["rows"]:
        src, dst = str(entry["from"]), str(entry["to"])
        rows.setdefault(src, {})
        rows[src][dst] = rows[src].get(dst, 0) + parse_number(entry["p"], mode)
    declared = optimal if any("optimal" in e for e in data["states"]) else None
    return StateChain.build(rows, fitness, declared, mode)


def chain_to_json(chain: StateChain) -> dict:
    return {
        "mode": chain.mode,
        "states": [
            {"id": s, "fitness": format_number(chain.fitness[s]), "optimal": s in chain.optimal_set}
            for s in chain.states
        ],
        "rows": [
            {"from": x, "to": y, "p": format_number(p)}
            for x in chain.states
            for y, p in chain.rows.get(x, {}).items()
        ],
    }


def load_chain(path: str | FsPath) -> StateChain:
    with open(path, encoding="utf-8") as fh:
        return chain_from_json(json.load(fh))


def save_chain(chain: StateChain, path: str | FsPath) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(chain_to_json(chain), fh, indent=2)
        fh.write("\n")
