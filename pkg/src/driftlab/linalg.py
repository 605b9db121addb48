"""Dense linear solves for the exact oracle.

Rational systems go through fraction-free (Bareiss) elimination on an
integer-scaled augmented matrix, so every intermediate stays an integer and
the only divisions are the exact Bareiss quotients. Float systems use LAPACK
with one step of iterative refinement.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import SingularSystemError
from .numeric import RATIONAL

FLOAT_RESIDUAL_TOL = 1e-10


def _integer_rows(A: Sequence[Sequence], B: Sequence[Sequence]) -> list[list[int]]:
    rows = []
    for a_row, b_row in zip(A, B):
        entries = [Fraction(x) for x in a_row] + [Fraction(x) for x in b_row]
        scale = 1
        for x in entries:
            scale = scale * x.denominator // math.gcd(scale, x.denominator)
        rows.append([x.numerator * (scale // x.denominator) for x in entries])
    return rows


def bareiss_solve(A: Sequence[Sequence], B: Sequence[Sequence]) -> list[list[Fraction]]:
    """Solve ``A X = B`` exactly; ``B`` holds one column per right-hand side."""
    n = len(A)
    if n == 0:
        return []
    m = len(B[0])
    M = _integer_rows(A, B)
    width = n + m
    prev = 1
    for k in range(n):
        if M[k][k] == 0:
            for r in range(k + 1, n):
                if M[r][k] != 0:
                    M[k], M[r] = M[r], M[k]
                    break
            else:
                raise SingularSystemError(f"singular system at column {k}")
        pivot = M[k][k]
        row_k = M[k]
        for i in range(k + 1, n):
            row_i = M[i]
            factor = row_i[k]
            if factor == 0:
                for j in range(k + 1, width):
                    if row_i[j]:
                        row_i[j] = pivot * row_i[j] // prev
            else:
                for j in range(k + 1, width):
                    row_i[j] = (pivot * row_i[j] - factor * row_k[j]) // prev
            row_i[k] = 0
        prev = pivot
    X = [[Fraction(0)] * m for _ in range(n)]
    for i in range(n - 1, -1, -1):
        row = M[i]
        for c in range(m):
            acc = Fraction(row[n + c])
            for j in range(i + 1, n):
                if row[j]:
                    acc -= row[j] * X[j][c]
            X[i][c] = acc / row[i]
    return X


def float_solve(A: Sequence[Sequence], B: Sequence[Sequence]) -> list[list[float]]:
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    if a.size == 0:
        return []
    try:
        x = np.linalg.solve(a, b)
        x += np.linalg.solve(a, b - a @ x)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc
    residual = np.abs(a @ x - b).max()
    scale = max(1.0, np.abs(b).max(), np.abs(x).max())
    if not np.isfinite(residual) or residual > FLOAT_RESIDUAL_TOL * scale:
        raise SingularSystemError(f"float solve residual {residual:.3e} above tolerance")
    return x.tolist()


def solve(A: Sequence[Sequence], B: Sequence[Sequence], mode: str) -> list[list]:
    if mode == RATIONAL:
        return bareiss_solve(A, B)
    return float_solve(A, B)
