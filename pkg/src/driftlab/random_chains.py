"""Random elitist chains with small rational transition probabilities.

Used by the property tests and the acceptance harness. Level ``k`` gets
fitness ``K - k``; each non-optimal state always keeps some mass on a
higher level, so the chain converges.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .chain import StateChain


def random_elitist_chain(
    seed: int,
    max_levels: int = 6,
    max_states: int = 3,
    singleton: bool = False,
    min_levels: int = 2,
    zero_rate: float = 0.35,
    max_weight: int = 5,
) -> StateChain:
    """Chain with ``K`` in ``[min_levels, max_levels]`` non-optimal levels.

    Each transition weight is an integer in ``[0, max_weight]``, zero with
    probability ``zero_rate``; rows are normalized exactly.
    """
    rnd = random.Random(seed)
    K = rnd.randint(min_levels, max_levels)
    levels = []
    for k in range(K + 1):
        size = 1 if singleton else rnd.randint(1, max_states)
        levels.append([f"x{k}_{i}" for i in range(size)])
    fitness = {s: Fraction(K - k) for k in range(K + 1) for s in levels[k]}
    rows: dict[str, dict[str, Fraction]] = {}
    for k, lv in enumerate(levels):
        for x in lv:
            weights: dict[str, int] = {}
            for j in range(k + 1):
                for y in levels[j]:
                    if rnd.random() >= zero_rate:
                        weights[y] = rnd.randint(1, max_weight)
            if k == 0:
                weights = {y: w for y, w in weights.items() if y in levels[0]} or {x: 1}
            elif not any(y in weights for j in range(k) for y in levels[j]):
                y = rnd.choice([y for j in range(k) for y in levels[j]])
                weights[y] = rnd.randint(1, max_weight)
            total = sum(weights.values())
            rows[x] = {y: Fraction(w, total) for y, w in weights.items()}
    return StateChain.build(rows, fitness)
