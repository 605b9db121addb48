"""Knapsack instances KP1-KP6 and the exact chains of two (1+1) EAs on them.

Solutions are bit tuples ``(b_1, ..., b_n)``; the chain builders work on
integer bitmasks where bit ``i`` holds item ``i + 1``. Two variants exist:
``feasibility`` (offspring compared by feasibility rules) and ``greedy``
(infeasible offspring repaired by dropping the cheapest items first).

Transition probabilities are exact: a mutation flipping ``j`` given bits has
probability ``(n-1)^(n-j) / n^n``, so every row is accumulated as integer
counts over the common denominator ``n^n``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .chain import StateChain
from .errors import GuardError

FEASIBILITY = "feasibility"
GREEDY = "greedy"
VARIANTS = (FEASIBILITY, GREEDY)
_ALIASES = {"feasibility_rules": FEASIBILITY, "greedy_repair": GREEDY}

FULL_MAX_N = 12
LUMPED_MAX_N = 64
BUILTIN_IDS = ("KP1", "KP2", "KP3", "KP4", "KP5", "KP6")


def normalize_variant(variant: str) -> str:
    v = _ALIASES.get(variant, variant)
    if v not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected 'feasibility' or 'greedy'")
    return v


@dataclass(frozen=True)
class KnapsackInstance:
    """Item values and weights as exact rationals; ``capacity=None`` is unbounded."""

    id: str
    n: int
    values: tuple[Fraction, ...]
    weights: tuple[Fraction, ...]
    capacity: Fraction | None

    def __post_init__(self):
        if self.n < 4:
            raise ValueError(f"need at least 4 items, got n={self.n}")
        if len(self.values) != self.n or len(self.weights) != self.n:
            raise ValueError("values and weights must both have n entries")
        if any(v <= 0 for v in self.values) or any(w <= 0 for w in self.weights):
            raise ValueError("values and weights must be positive")
        if self.capacity is not None and self.capacity < 0:
            raise ValueError("capacity must be non-negative")

    @property
    def exchangeable(self) -> bool:
        """Items 3..n identical, which is what the class chain relies on."""
        return len(set(self.values[2:])) <= 1 and len(set(self.weights[2:])) <= 1

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "n": self.n,
            "values": [str(v) for v in self.values],
            "weights": [str(w) for w in self.weights],
            "capacity": "inf" if self.capacity is None else str(self.capacity),
        }

    @classmethod
    def from_json(cls, data: Mapping) -> KnapsackInstance:
        cap = data["capacity"]
        capacity = None if str(cap).strip().lower() in ("inf", "infinity") else Fraction(str(cap))
        return cls(
            str(data.get("id", "custom")),
            int(data["n"]),
            tuple(Fraction(str(v)) for v in data["values"]),
            tuple(Fraction(str(w)) for w in data["weights"]),
            capacity,
        )


def load_instance(path) -> KnapsackInstance:
    with open(path, encoding="utf-8") as fh:
        return KnapsackInstance.from_json(json.load(fh))


def make_instance(id: str, n: int) -> KnapsackInstance:
    """Build one of the six benchmark instances for ``n`` items."""
    key = id.upper()
    if key not in BUILTIN_IDS:
        raise ValueError(f"unknown instance {id!r}; expected one of {BUILTIN_IDS}")
    if n < 4:
        raise ValueError(f"{key} needs n >= 4, got {n}")
    if key in ("KP2", "KP5") and n % 2:
        raise ValueError(f"{key} needs even n, got {n}")
    if key == "KP4" and n % 4:
        raise ValueError(f"KP4 needs n divisible by 4, got {n}")
    N = Fraction(n)
    v1, v2 = N - 2, N / 2 - Fraction(1, 3)
    w1, w2 = N - 2, N - 3
    cap: Fraction | None = N - 2
    if key == "KP2":
        cap = N - 3
    elif key == "KP3":
        v1 = N - 1
    elif key == "KP4":
        w2 = N / 4
    elif key == "KP5":
        v1 = N - 2 - Fraction(2, 3)
        w2 = N / 2
    elif key == "KP6":
        w2 = N / 2
        cap = None
    rest = n - 2
    values = (v1, v2) + (Fraction(1),) * rest
    weights = (w1, w2) + (Fraction(1),) * rest
    return KnapsackInstance(key, n, values, weights, cap)


class Evaluation(NamedTuple):
    fitness: Fraction
    weight: Fraction
    feasible: bool


def _check_length(inst: KnapsackInstance, x: Sequence[int]) -> None:
    if len(x) != inst.n:
        raise ValueError(f"solution has {len(x)} bits, instance has {inst.n} items")


def evaluate(inst: KnapsackInstance, x: Sequence[int]) -> Evaluation:
    """Fitness is the value sum whether or not the weight fits."""
    _check_length(inst, x)
    f = sum((v for v, b in zip(inst.values, x) if b), Fraction(0))
    w = sum((wt for wt, b in zip(inst.weights, x) if b), Fraction(0))
    return Evaluation(f, w, inst.capacity is None or w <= inst.capacity)


def violation(inst: KnapsackInstance, x: Sequence[int]) -> Fraction:
    """Excess weight ``sum w_i b_i - C``, 0 when feasible."""
    ev = evaluate(inst, x)
    if ev.feasible:
        return Fraction(0)
    return ev.weight - inst.capacity


def greedy_repair(inst: KnapsackInstance, x: Sequence[int]) -> tuple[int, ...]:
    """Drop included items, cheapest first, until the weight fits.

    Among equally cheap items the heavier goes first, then the higher index.
    """
    _check_length(inst, x)
    y = list(int(b) for b in x)
    if inst.capacity is None:
        return tuple(y)
    w = sum((wt for wt, b in zip(inst.weights, y) if b), Fraction(0))
    if w <= inst.capacity:
        return tuple(y)
    order = sorted((i for i in range(inst.n) if y[i]), key=lambda i: (inst.values[i], -inst.weights[i], -i))
    for i in order:
        y[i] = 0
        w -= inst.weights[i]
        if w <= inst.capacity:
            break
    return tuple(y)


def accept_feasibility(parent: Evaluation, child: Evaluation) -> bool:
    """Feasibility rules; ties keep the offspring."""
    if parent.feasible and child.feasible:
        return child.fitness >= parent.fitness
    if parent.feasible != child.feasible:
        return child.feasible
    return child.weight <= parent.weight


class LevelClass(NamedTuple):
    """Solutions with the given first two bits and ``k`` ones among items 3..n."""

    b1: int
    b2: int
    k: int

    def __str__(self) -> str:
        return f"({self.b1},{self.b2};{self.k})"

    def representative(self, n: int) -> tuple[int, ...]:
        return (self.b1, self.b2) + (1,) * self.k + (0,) * (n - 2 - self.k)


def classify(x: Sequence[int]) -> LevelClass:
    return LevelClass(int(x[0]), int(x[1]), int(sum(x[2:])))


def parse_class(text: str) -> LevelClass:
    inner = text.strip().strip("()")
    head, k = inner.split(";")
    b1, b2 = head.split(",")
    return LevelClass(int(b1), int(b2), int(k))


def bits_id(x: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in x)


def empty_state(inst: KnapsackInstance, lumped: bool) -> str:
    return str(LevelClass(0, 0, 0)) if lumped else "0" * inst.n


# Full chain -----------------------------------------------------------------


def _mask_bits(mask: int, n: int) -> tuple[int, ...]:
    return tuple((mask >> i) & 1 for i in range(n))


def _bits_mask(x: Sequence[int]) -> int:
    return sum(1 << i for i, b in enumerate(x) if b)


def _scale(fracs: Sequence[Fraction]) -> tuple[int, list[int]]:
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return den, [int(f * den) for f in fracs]


@dataclass(frozen=True, eq=False)
class MaskTables:
    """Per-mask fitness, weight and feasibility for all ``2^n`` solutions.

    Values and weights are held as integers over common denominators so the
    arrays can be compared exactly with numpy.
    """

    n: int
    fitness: np.ndarray
    weight: np.ndarray
    feasible: np.ndarray
    value_den: int
    weight_den: int

    def fitness_of(self, mask: int) -> Fraction:
        return Fraction(int(self.fitness[mask]), self.value_den)


def mask_tables(inst: KnapsackInstance) -> MaskTables:
    n = inst.n
    vden, vint = _scale(inst.values)
    wfr = list(inst.weights) + ([inst.capacity] if inst.capacity is not None else [])
    wden, wint = _scale(wfr)
    masks = np.arange(1 << n, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)) & 1
    fit = bits @ np.asarray(vint, dtype=np.int64)
    wt = bits @ np.asarray(wint[:n], dtype=np.int64)
    feas = np.ones(1 << n, dtype=bool) if inst.capacity is None else wt <= wint[n]
    return MaskTables(n, fit, wt, feas, vden, wden)


def _mutation_weights(n: int) -> np.ndarray:
    """``(n-1)^(n-|M|)`` for every flip mask ``M``; divide by ``n^n`` for probabilities."""
    pops = np.array([bin(m).count("1") for m in range(1 << n)], dtype=np.int64)
    powers = np.array([(n - 1) ** (n - j) for j in range(n + 1)], dtype=np.int64)
    return powers[pops]


def _check_full(inst: KnapsackInstance) -> None:
    if inst.n > FULL_MAX_N:
        raise GuardError(f"full chain needs n <= {FULL_MAX_N} (got n={inst.n}); use the class chain")


def build_full_chain(inst: KnapsackInstance, variant: str) -> StateChain:
    """Exact chain over feasible solutions, expectation over all flip masks."""
    variant = normalize_variant(variant)
    _check_full(inst)
    n = inst.n
    tab = mask_tables(inst)
    weights = _mutation_weights(n)
    flips = np.arange(1 << n, dtype=np.int64)
    denom = n**n
    if variant == GREEDY:
        repaired = np.array([_bits_mask(greedy_repair(inst, _mask_bits(m, n))) for m in range(1 << n)], dtype=np.int64)
    states = [m for m in range(1 << n) if tab.feasible[m]]
    rows: dict[str, dict[str, Fraction]] = {}
    for x in states:
        y = x ^ flips
        if variant == GREEDY:
            y = repaired[y]
            ok = tab.fitness[y] >= tab.fitness[x]
        else:
            ok = tab.feasible[y] & (tab.fitness[y] >= tab.fitness[x])
        out = np.where(ok, y, x)
        targets, inverse = np.unique(out, return_inverse=True)
        sums = np.zeros(len(targets), dtype=np.int64)
        np.add.at(sums, inverse, weights)
        xid = bits_id(_mask_bits(x, n))
        rows[xid] = {bits_id(_mask_bits(int(t), n)): Fraction(int(s), denom) for t, s in zip(targets, sums)}
    fitness = {bits_id(_mask_bits(m, n)): tab.fitness_of(m) for m in states}
    return StateChain.build(rows, fitness)


def class_aggregate(chain: StateChain, source: str) -> dict[LevelClass, Fraction]:
    """Sum a full-chain row over the classes of its targets."""
    out: dict[LevelClass, Fraction] = {}
    for y, p in chain.rows[source].items():
        c = classify([int(ch) for ch in y])
        out[c] = out.get(c, Fraction(0)) + p
    return out


# Lumped chain ---------------------------------------------------------------


def _check_lumped(inst: KnapsackInstance) -> None:
    if inst.n > LUMPED_MAX_N:
        raise GuardError(f"class chain needs n <= {LUMPED_MAX_N} (got n={inst.n})")
    if not inst.exchangeable:
        raise ValueError(f"instance {inst.id} is not exchangeable on items 3..n; use the full chain")


def build_lumped_chain(inst: KnapsackInstance, variant: str) -> StateChain:
    """Exact chain over feasible classes ``(b1, b2; k)``."""
    variant = normalize_variant(variant)
    _check_lumped(inst)
    n = inst.n
    m = n - 2
    denom = n**n
    power = [(n - 1) ** (n - j) for j in range(n + 1)]
    binom = [[math.comb(a, b) for b in range(n + 1)] for a in range(n + 1)]

    @lru_cache(maxsize=None)
    def ev(c: LevelClass) -> Evaluation:
        return evaluate(inst, c.representative(n))

    @lru_cache(maxsize=None)
    def repaired(c: LevelClass) -> LevelClass:
        return classify(greedy_repair(inst, c.representative(n)))

    classes = [LevelClass(b1, b2, k) for b1 in (0, 1) for b2 in (0, 1) for k in range(m + 1)]
    states = [c for c in classes if ev(c).feasible]
    rows: dict[str, dict[str, Fraction]] = {}
    for x in states:
        fx = ev(x)
        acc: dict[LevelClass, int] = {}
        i = x.k
        for f1 in (0, 1):
            for f2 in (0, 1):
                for u in range(i + 1):
                    for v in range(m - i + 1):
                        count = binom[i][u] * binom[m - i][v] * power[f1 + f2 + u + v]
                        y = LevelClass(x.b1 ^ f1, x.b2 ^ f2, i - u + v)
                        if variant == GREEDY:
                            y = repaired(y)
                            keep = ev(y).fitness >= fx.fitness
                        else:
                            fy = ev(y)
                            keep = fy.feasible and fy.fitness >= fx.fitness
                        z = y if keep else x
                        acc[z] = acc.get(z, 0) + count
        rows[str(x)] = {str(z): Fraction(c, denom) for z, c in acc.items()}
    fitness = {str(c): ev(c).fitness for c in states}
    return StateChain.build(rows, fitness)


def build_chain(inst: KnapsackInstance, variant: str, lumped: bool = True) -> StateChain:
    return build_lumped_chain(inst, variant) if lumped else build_full_chain(inst, variant)
