"""Exact hitting probabilities and hitting times of elitist chains.

Every quantity here solves a linear system restricted by elitism: a chain in
level ``j`` can only move to levels ``<= j``, so unknowns ordered by level
give block-triangular systems that are solved one level block at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .chain import LevelPartition, StateChain, build_level_partition
from .errors import ChainError, SingularSystemError
from .linalg import solve
from .numeric import RATIONAL, Number, is_close


def _zero(mode: str) -> Number:
    return Fraction(0) if mode == RATIONAL else 0.0


def _one(mode: str) -> Number:
    return Fraction(1) if mode == RATIONAL else 1.0


def _solve_level(
    chain: StateChain,
    block: Sequence[str],
    rhs: list[list[Number]],
) -> list[list[Number]]:
    """Solve ``(I - P_bb) X = rhs`` on one level block."""
    mode = chain.mode
    index = {s: i for i, s in enumerate(block)}
    one, zero = _one(mode), _zero(mode)
    A = [[zero] * len(block) for _ in block]
    for i, x in enumerate(block):
        A[i][i] = one
        for y, p in chain.rows[x].items():
            j = index.get(y)
            if j is not None:
                A[i][j] -= p
    try:
        return solve(A, rhs, mode)
    except SingularSystemError as exc:
        raise SingularSystemError(f"level block {list(block)[:3]}...: {exc}") from exc


@dataclass(frozen=True, eq=False)
class HittingProfile:
    """Hitting probabilities into ``S_target`` and first-entry distributions.

    ``entry[x][y]`` is the probability that the first state of ``S_target``
    visited from ``x`` is ``y``.
    """

    target: int
    mode: str
    h: Mapping[str, Number]
    entry: Mapping[str, Mapping[str, Number]]

    def h_min(self, partition: LevelPartition, k: int) -> Number:
        return min(self.h[x] for x in partition.levels[k])

    def h_max(self, partition: LevelPartition, k: int) -> Number:
        return max(self.h[x] for x in partition.levels[k])


def hitting_probabilities(chain: StateChain, partition: LevelPartition, ell: int) -> HittingProfile:
    if not 0 <= ell <= partition.K:
        raise ValueError(f"target level {ell} out of range 0..{partition.K}")
    mode = chain.mode
    zero, one = _zero(mode), _one(mode)
    targets = partition.levels[ell]
    tindex = {y: c for c, y in enumerate(targets)}
    entry: dict[str, dict[str, Number]] = {}
    h: dict[str, Number] = {}
    for k in range(ell):
        for x in partition.levels[k]:
            h[x] = zero
            entry[x] = {y: zero for y in targets}
    for x in targets:
        h[x] = one
        entry[x] = {y: (one if y == x else zero) for y in targets}
    for j in range(ell + 1, partition.K + 1):
        block = partition.levels[j]
        rhs = []
        for x in block:
            row = [zero] * len(targets)
            for z, p in chain.rows[x].items():
                c = tindex.get(z)
                if c is not None:
                    row[c] += p
                elif ell < partition.level_of[z] < j:
                    ez = entry[z]
                    for y, c2 in tindex.items():
                        row[c2] += p * ez[y]
            rhs.append(row)
        sol = _solve_level(chain, block, rhs)
        for x, vals in zip(block, sol):
            entry[x] = {y: vals[c] for y, c in tindex.items()}
            h[x] = sum(vals, zero)
    return HittingProfile(ell, mode, h, entry)


def hitting_profiles(chain: StateChain, partition: LevelPartition) -> list[HittingProfile]:
    return [hitting_probabilities(chain, partition, ell) for ell in range(partition.K + 1)]


def h_extrema(profiles: Sequence[HittingProfile], partition: LevelPartition) -> dict[tuple[int, int], tuple[Number, Number]]:
    """``(k, ell) -> (h_min(X_k, S_ell), h_max(X_k, S_ell))`` for ``ell <= k``."""
    out = {}
    for prof in profiles:
        for k in range(prof.target, partition.K + 1):
            out[(k, prof.target)] = (prof.h_min(partition, k), prof.h_max(partition, k))
    return out


def mean_exit_time(chain: StateChain, partition: LevelPartition, k: int) -> dict[str, Number]:
    """Expected steps for each state of ``S_k`` to leave ``S_k``."""
    if not 1 <= k <= partition.K:
        raise ValueError(f"level {k} out of range 1..{partition.K}")
    block = partition.levels[k]
    one = _one(chain.mode)
    sol = _solve_level(chain, block, [[one] for _ in block])
    return {x: v[0] for x, v in zip(block, sol)}


def mean_hitting_time(chain: StateChain, dense: bool = False) -> dict[str, Number]:
    """Expected steps to reach the optimal set from every state.

    Solves ``m = 1 + P m`` off the optimal set directly. By default the
    system is eliminated level block by level block; ``dense=True`` runs one
    elimination over all transient states instead, which is slower but makes
    no use of the level structure.
    """
    partition = build_level_partition(chain)
    mode = chain.mode
    zero, one = _zero(mode), _one(mode)
    m: dict[str, Number] = {x: zero for x in partition.levels[0]}
    if dense:
        transient = [x for k in range(1, partition.K + 1) for x in partition.levels[k]]
        index = {s: i for i, s in enumerate(transient)}
        A = [[zero] * len(transient) for _ in transient]
        for i, x in enumerate(transient):
            A[i][i] += one
            for y, p in chain.rows[x].items():
                j = index.get(y)
                if j is not None:
                    A[i][j] -= p
        sol = solve(A, [[one] for _ in transient], mode) if transient else []
        m.update({x: v[0] for x, v in zip(transient, sol)})
        return {x: m[x] for x in chain.states}
    for k in range(1, partition.K + 1):
        block = partition.levels[k]
        rhs = []
        for x in block:
            acc = one
            for y, p in chain.rows[x].items():
                if partition.level_of[y] < k:
                    acc += p * m[y]
            rhs.append([acc])
        sol = _solve_level(chain, block, rhs)
        m.update({x: v[0] for x, v in zip(block, sol)})
    return {x: m[x] for x in chain.states}


@dataclass(frozen=True)
class Decomposition:
    """Expected time spent in each level on the way from ``start`` to ``S_0``."""

    start: str
    terms: Mapping[int, Number]
    total: Number
    exact: Number
    mode: str

    @property
    def matches(self) -> bool:
        return is_close(self.total, self.exact, self.mode)


@dataclass(frozen=True, eq=False)
class TimeProfile:
    """Exit times, total hitting times and, optionally, one decomposition."""

    exit_time: Mapping[str, Number]
    hitting_time: Mapping[str, Number]
    decomposition: Decomposition | None = None


def decompose_hitting_time(
    chain: StateChain,
    partition: LevelPartition,
    start: str,
    profiles: Sequence[HittingProfile] | None = None,
    exits: Mapping[str, Number] | None = None,
    exact: Mapping[str, Number] | None = None,
) -> Decomposition:
    """Split ``m(start)`` into per-level staying times.

    The staying time in ``S_ell`` is the first-entry distribution into
    ``S_ell`` weighted by the exit time of each entry state. Precomputed
    profiles, exit times and exact hitting times may be passed in to share
    work across many starts.
    """
    k = partition.level_of[start]
    if k == 0:
        raise ChainError(f"start state {start} is already optimal")
    zero = _zero(chain.mode)
    if exits is None:
        exits = {}
        for j in range(1, partition.K + 1):
            exits.update(mean_exit_time(chain, partition, j))
    if exact is None:
        exact = mean_hitting_time(chain)
    terms: dict[int, Number] = {}
    for ell in range(k, 0, -1):
        prof = profiles[ell] if profiles is not None else hitting_probabilities(chain, partition, ell)
        first = prof.entry[start]
        terms[ell] = sum((first[y] * exits[y] for y in partition.levels[ell]), zero)
    total = sum(terms.values(), zero)
    return Decomposition(start, terms, total, exact[start], chain.mode)


def time_profile(chain: StateChain, partition: LevelPartition, start: str | None = None) -> TimeProfile:
    exits: dict[str, Number] = {}
    for j in range(1, partition.K + 1):
        exits.update(mean_exit_time(chain, partition, j))
    m = mean_hitting_time(chain)
    dec = None
    if start is not None and partition.level_of[start] > 0:
        dec = decompose_hitting_time(chain, partition, start, exits=exits, exact=m)
    return TimeProfile(exits, m, dec)
