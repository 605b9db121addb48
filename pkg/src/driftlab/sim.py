"""Monte Carlo runs of the two (1+1) EAs on knapsack instances.

Every trial owns a generator seeded from ``SeedSequence(seed, spawn_key=(i,))``
so results do not depend on how trials are spread over workers. Inside a
trial, mutation masks are drawn in blocks and packed into integers; fitness
and weight come from per-byte lookup tables.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .knapsack import (
    FEASIBILITY,
    GREEDY,
    KnapsackInstance,
    LevelClass,
    accept_feasibility,
    evaluate,
    greedy_repair,
    normalize_variant,
)

BRUTE_FORCE_MAX_N = 20
_FIRST_BLOCK = 64
_MAX_BLOCK = 4096


def mutate(x: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    """Flip each bit independently with probability ``1/n``."""
    n = len(x)
    flips = rng.random(n) < 1.0 / n
    return tuple(int(b) ^ int(f) for b, f in zip(x, flips))


def step_feasibility_rules(inst: KnapsackInstance, x: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    y = mutate(x, rng)
    return y if accept_feasibility(evaluate(inst, x), evaluate(inst, y)) else tuple(x)


def step_greedy_repair(inst: KnapsackInstance, x: Sequence[int], rng: np.random.Generator) -> tuple[int, ...]:
    y = greedy_repair(inst, mutate(x, rng))
    return y if evaluate(inst, y).fitness >= evaluate(inst, x).fitness else tuple(x)


def optimum_value(inst: KnapsackInstance) -> Fraction:
    """Best feasible fitness, by class enumeration or brute force."""
    if inst.exchangeable:
        best = None
        for b1 in (0, 1):
            for b2 in (0, 1):
                for k in range(inst.n - 1):
                    ev = evaluate(inst, LevelClass(b1, b2, k).representative(inst.n))
                    if ev.feasible and (best is None or ev.fitness > best):
                        best = ev.fitness
        return best
    if inst.n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"optimum of a non-exchangeable instance needs n <= {BRUTE_FORCE_MAX_N}")
    best = None
    for m in range(1 << inst.n):
        ev = evaluate(inst, [(m >> i) & 1 for i in range(inst.n)])
        if ev.feasible and (best is None or ev.fitness > best):
            best = ev.fitness
    return best


def _common_den(fracs) -> int:
    den = 1
    for f in fracs:
        den = den * f.denominator // math.gcd(den, f.denominator)
    return den


class Kernel:
    """Integer bitmask evaluation of one instance.

    Values and weights are scaled to integers; ``value(m)`` and ``weight(m)``
    sum per-byte tables. Greedy repairs are memoized per mask.
    """

    def __init__(self, inst: KnapsackInstance):
        self.inst = inst
        self.n = n = inst.n
        vden = _common_den(inst.values)
        wden = _common_den(list(inst.weights) + ([inst.capacity] if inst.capacity is not None else []))
        self.vden = vden
        vals = [int(v * vden) for v in inst.values]
        wts = [int(w * wden) for w in inst.weights]
        self.cap = None if inst.capacity is None else int(inst.capacity * wden)
        self.width = n if n <= 16 else 8
        self.chunks = (n + self.width - 1) // self.width
        self.vtab: list[list[int]] = []
        self.wtab: list[list[int]] = []
        for c in range(self.chunks):
            lo = c * self.width
            bits = min(self.width, n - lo)
            vt, wt = [0] * (1 << bits), [0] * (1 << bits)
            for m in range(1, 1 << bits):
                low = (m & -m).bit_length() - 1
                vt[m] = vt[m & (m - 1)] + vals[lo + low]
                wt[m] = wt[m & (m - 1)] + wts[lo + low]
            self.vtab.append(vt)
            self.wtab.append(wt)
        self.mask_unit = (1 << self.width) - 1
        self.opt = int(optimum_value(inst) * vden)
        self._repair: dict[int, int] = {}
        self._pow = np.array([1 << i for i in range(n)], dtype=np.int64) if n <= 62 else None

    def value(self, m: int) -> int:
        if self.chunks == 1:
            return self.vtab[0][m]
        s, w, u = 0, self.width, self.mask_unit
        for t in self.vtab:
            s += t[m & u]
            m >>= w
        return s

    def weight(self, m: int) -> int:
        if self.chunks == 1:
            return self.wtab[0][m]
        s, w, u = 0, self.width, self.mask_unit
        for t in self.wtab:
            s += t[m & u]
            m >>= w
        return s

    def feasible(self, m: int) -> bool:
        return self.cap is None or self.weight(m) <= self.cap

    def repair(self, m: int) -> int:
        if self.feasible(m):
            return m
        r = self._repair.get(m)
        if r is None:
            bits = greedy_repair(self.inst, [(m >> i) & 1 for i in range(self.n)])
            r = sum(1 << i for i, b in enumerate(bits) if b)
            self._repair[m] = r
        return r

    def draw(self, rng: np.random.Generator, count: int) -> list[int]:
        """``count`` packed mutation masks."""
        flips = rng.random((count, self.n)) < 1.0 / self.n
        if self._pow is not None:
            return (flips.astype(np.int64) @ self._pow).tolist()
        packed = np.packbits(flips, axis=1, bitorder="little")
        return [int.from_bytes(row.tobytes(), "little") for row in packed]

    def bits(self, m: int) -> tuple[int, ...]:
        return tuple((m >> i) & 1 for i in range(self.n))


class TrialResult(NamedTuple):
    index: int
    generation: int
    censored: bool
    final_state: str
    seed: int


def _run_trial(kernel: Kernel, variant: str, cap: int, seed: int, index: int) -> TrialResult:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    x = 0
    fx, wx = kernel.value(x), kernel.weight(x)
    cap_w = kernel.cap
    feas_x = cap_w is None or wx <= cap_w
    opt = kernel.opt

    def state() -> str:
        return "".join(str(b) for b in kernel.bits(x))

    if feas_x and fx == opt:
        return TrialResult(index, 0, False, state(), seed)
    t = 0
    block = _FIRST_BLOCK
    greedy = variant == GREEDY
    value, weight, repair = kernel.value, kernel.weight, kernel.repair
    while t < cap:
        count = min(block, cap - t)
        block = min(block * 2, _MAX_BLOCK)
        for m in kernel.draw(rng, count):
            t += 1
            if m == 0:
                continue
            y = x ^ m
            if greedy:
                y = repair(y)
                fy = value(y)
                if fy >= fx:
                    x, fx = y, fy
                    if fx == opt:
                        return TrialResult(index, t, False, state(), seed)
                continue
            fy, wy = value(y), weight(y)
            feas_y = cap_w is None or wy <= cap_w
            if feas_x and feas_y:
                take = fy >= fx
            elif feas_x != feas_y:
                take = feas_y
            else:
                take = wy <= wx
            if take:
                x, fx, wx, feas_x = y, fy, wy, feas_y
                if feas_x and fx == opt:
                    return TrialResult(index, t, False, state(), seed)
    return TrialResult(index, cap, True, state(), seed)


def _run_chunk(args) -> list[TrialResult]:
    inst, variant, cap, seed, indices = args
    kernel = Kernel(inst)
    return [_run_trial(kernel, variant, cap, seed, i) for i in indices]


@dataclass(frozen=True)
class SimEstimate:
    """Mean hitting generation over the uncensored trials."""

    instance: str
    variant: str
    n: int
    trials: int
    cap: int
    seed: int
    mean: float
    se: float
    censored: int

    @property
    def hits(self) -> int:
        return self.trials - self.censored

    def row(self) -> list:
        return [self.instance, self.variant, self.n, self.trials, self.cap, repr(self.mean), repr(self.se), self.censored, self.seed]


CSV_HEADER = ["instance", "variant", "n", "trials", "cap", "mean", "se", "censored", "seed"]


def estimates_csv(estimates: Sequence[SimEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for e in estimates:
        w.writerow(e.row())
    return buf.getvalue()


def run_trials(
    inst: KnapsackInstance,
    variant: str,
    trials: int,
    cap: int,
    seed: int,
    workers: int = 1,
) -> list[TrialResult]:
    """All trials from the empty knapsack, ordered by trial index."""
    variant = normalize_variant(variant)
    if trials < 1 or cap < 1:
        raise ValueError("trials and cap must be at least 1")
    indices = list(range(trials))
    if workers <= 1:
        return _run_chunk((inst, variant, cap, seed, indices))
    size = math.ceil(trials / workers)
    parts = [(inst, variant, cap, seed, indices[i : i + size]) for i in range(0, trials, size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = [r for chunk in pool.map(_run_chunk, parts) for r in chunk]
    return sorted(out, key=lambda r: r.index)


def summarize(inst: KnapsackInstance, variant: str, results: Sequence[TrialResult], cap: int, seed: int) -> SimEstimate:
    hits = np.array([r.generation for r in results if not r.censored], dtype=float)
    censored = len(results) - len(hits)
    if censored:
        warnings.warn(
            f"{censored} of {len(results)} trials hit the cap of {cap} generations and are left out of the mean",
            RuntimeWarning,
            stacklevel=3,
        )
    mean = float(hits.mean()) if len(hits) else math.nan
    se = float(hits.std(ddof=1) / math.sqrt(len(hits))) if len(hits) > 1 else math.nan
    return SimEstimate(inst.id, normalize_variant(variant), inst.n, len(results), cap, seed, mean, se, censored)


def estimate_hitting_time(
    inst: KnapsackInstance,
    variant: str,
    trials: int,
    cap: int,
    seed: int,
    workers: int = 1,
) -> SimEstimate:
    results = run_trials(inst, variant, trials, cap, seed, workers)
    return summarize(inst, variant, results, cap, seed)


__all__ = [
    "FEASIBILITY",
    "GREEDY",
    "Kernel",
    "SimEstimate",
    "TrialResult",
    "estimate_hitting_time",
    "estimates_csv",
    "mutate",
    "optimum_value",
    "run_trials",
    "step_feasibility_rules",
    "step_greedy_repair",
    "summarize",
]
